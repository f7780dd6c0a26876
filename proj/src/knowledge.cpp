#include "scopex/knowledge.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <regex>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "scopex/text.hpp"

namespace scopex {
namespace {

struct TreeShape {
    NodeRole root_role;
    NodeRole child_role;
    EdgeKind edge_kind;
    bool payload_to_root;  // edge orientation; temporal chains override this
};

TreeShape shape_for(const ExtensionKind& kind) {
    switch (kind.tag) {
        case ExtensionKind::Tag::Vertical:
            return {NodeRole::Question, NodeRole::Cause, EdgeKind::Causes, true};
        case ExtensionKind::Tag::Horizontal:
            return {NodeRole::Question, NodeRole::Question, EdgeKind::Generalizes, false};
        case ExtensionKind::Tag::Generalization:
            return {NodeRole::Question, NodeRole::Question, EdgeKind::Generalizes, true};
        case ExtensionKind::Tag::Temporal:
            return {NodeRole::State, NodeRole::State, EdgeKind::Precedes, false};
        case ExtensionKind::Tag::Spatial:
            return {NodeRole::Region, NodeRole::Region, EdgeKind::Contains, true};
        case ExtensionKind::Tag::Scatter:
            return {NodeRole::Context, NodeRole::Context, EdgeKind::ScatterTransfer, false};
        case ExtensionKind::Tag::Dynamic:
            break;
    }
    throw Error(ErrorKind::InvalidInput,
                "no tree edge rule exists for extension kind " + kind.label());
}

void check_edge_roles(const KnowledgeEdge& edge,
                      const std::unordered_map<std::string, NodeRole>& roles) {
    const NodeRole from = roles.at(edge.from);
    const NodeRole to = roles.at(edge.to);
    switch (edge.kind) {
        case EdgeKind::Causes:
            if (from != NodeRole::Cause) {
                throw Error(ErrorKind::InvalidInput, "a causes edge must start at a cause node");
            }
            break;
        case EdgeKind::Contains:
            if (from != NodeRole::Region || to != NodeRole::Region) {
                throw Error(ErrorKind::InvalidInput, "a contains edge must join region nodes");
            }
            break;
        case EdgeKind::Precedes:
            if (from != NodeRole::State || to != NodeRole::State) {
                throw Error(ErrorKind::InvalidInput, "a precedes edge must join state nodes");
            }
            break;
        case EdgeKind::Generalizes:
        case EdgeKind::ScatterTransfer:
            break;
    }
}

void sort_nodes(std::vector<KnowledgeNode>& nodes) {
    std::sort(nodes.begin(), nodes.end(),
              [](const KnowledgeNode& a, const KnowledgeNode& b) { return a.key < b.key; });
}

void sort_edges(std::vector<KnowledgeEdge>& edges) {
    std::sort(edges.begin(), edges.end(),
              [](const KnowledgeEdge& a, const KnowledgeEdge& b) { return a.id() < b.id(); });
}

std::string tree_identity(const std::string& root_key, const ExtensionKind& kind,
                          const std::vector<KnowledgeEdge>& edges) {
    std::string blob = root_key + '|' + kind.label();
    std::vector<std::string> edge_ids;
    edge_ids.reserve(edges.size());
    for (const auto& edge : edges) edge_ids.push_back(edge.id());
    std::sort(edge_ids.begin(), edge_ids.end());
    for (const auto& id : edge_ids) blob += '|' + id;
    return 't' + hex64(fnv1a64(blob));
}

// Temporal payload fragments carry their position: "past[k]: ..." or
// "future[k]: ...". Returns (k, text) with k negative for past states.
std::pair<int, std::string> parse_temporal_fragment(const std::string& fragment) {
    static const std::regex pattern(R"(^(past|future)\[(\d+)\]:\s*(.*)$)");
    std::smatch match;
    if (!std::regex_match(fragment, match, pattern)) {
        throw Error(ErrorKind::InvalidInput,
                    "temporal payload fragment lacks a past[k]/future[k] label: " + fragment);
    }
    const int k = std::stoi(match[2].str());
    const std::string text = match[3].str();
    if (trim(text).empty()) {
        throw Error(ErrorKind::InvalidInput, "temporal payload fragment has no state text");
    }
    return {match[1].str() == "past" ? -k : k, text};
}

// Finds one directed cycle in the edge set and names it through labels.
std::string describe_cycle(const std::vector<KnowledgeNode>& nodes,
                           const std::vector<KnowledgeEdge>& edges) {
    std::unordered_map<std::string, std::vector<std::string>> adjacency;
    for (const auto& edge : edges) adjacency[edge.from].push_back(edge.to);
    std::unordered_map<std::string, std::string> labels;
    for (const auto& node : nodes) labels[node.key] = node.label;

    enum class Mark { White, Grey, Black };
    std::unordered_map<std::string, Mark> marks;
    std::vector<std::string> path;
    std::string cycle;

    std::function<bool(const std::string&)> visit = [&](const std::string& key) {
        marks[key] = Mark::Grey;
        path.push_back(key);
        for (const auto& next : adjacency[key]) {
            const Mark mark = marks.count(next) ? marks[next] : Mark::White;
            if (mark == Mark::Grey) {
                auto begin = std::find(path.begin(), path.end(), next);
                std::ostringstream out;
                for (auto it = begin; it != path.end(); ++it) {
                    out << (labels.count(*it) ? labels[*it] : *it) << " -> ";
                }
                out << (labels.count(next) ? labels[next] : next);
                cycle = out.str();
                return true;
            }
            if (mark == Mark::White && visit(next)) return true;
        }
        path.pop_back();
        marks[key] = Mark::Black;
        return false;
    };
    for (const auto& node : nodes) {
        if ((!marks.count(node.key) || marks[node.key] == Mark::White) && visit(node.key)) break;
    }
    return cycle.empty() ? "unlocated cycle" : cycle;
}

void check_acyclic(const std::vector<KnowledgeNode>& nodes,
                   const std::vector<KnowledgeEdge>& edges) {
    std::unordered_map<std::string, std::size_t> indegree;
    std::unordered_map<std::string, std::vector<std::string>> adjacency;
    for (const auto& node : nodes) indegree[node.key];
    for (const auto& edge : edges) {
        adjacency[edge.from].push_back(edge.to);
        ++indegree[edge.to];
    }
    std::deque<std::string> frontier;
    for (const auto& [key, degree] : indegree) {
        if (degree == 0) frontier.push_back(key);
    }
    std::size_t visited = 0;
    while (!frontier.empty()) {
        const std::string key = frontier.front();
        frontier.pop_front();
        ++visited;
        for (const auto& next : adjacency[key]) {
            if (--indegree[next] == 0) frontier.push_back(next);
        }
    }
    if (visited != indegree.size()) {
        throw Error(ErrorKind::CycleDetected, "cycle: " + describe_cycle(nodes, edges));
    }
}

}  // namespace

std::string node_role_label(NodeRole role) {
    switch (role) {
        case NodeRole::Question: return "question";
        case NodeRole::Method: return "method";
        case NodeRole::Context: return "context";
        case NodeRole::Cause: return "cause";
        case NodeRole::State: return "state";
        case NodeRole::Region: return "region";
    }
    return "question";
}

std::string edge_kind_label(EdgeKind kind) {
    switch (kind) {
        case EdgeKind::Generalizes: return "generalizes";
        case EdgeKind::Causes: return "causes";
        case EdgeKind::Precedes: return "precedes";
        case EdgeKind::Contains: return "contains";
        case EdgeKind::ScatterTransfer: return "scatter-transfer";
    }
    return "generalizes";
}

std::string KnowledgeEdge::id() const { return from + ':' + edge_kind_label(kind) + ':' + to; }

KnowledgeTree tree_from_extension(const std::string& root_label, const Extension& extension) {
    if (extension.payload.empty()) {
        throw Error(ErrorKind::ExtensionEmpty, "cannot build a tree from an empty payload");
    }
    if (normalize(root_label).empty()) {
        throw Error(ErrorKind::InvalidInput, "tree root label must be non-empty");
    }
    const TreeShape shape = shape_for(extension.kind);

    KnowledgeTree tree;
    tree.kind = extension.kind;
    tree.root = text_key(root_label);
    tree.nodes.push_back(KnowledgeNode{tree.root, trim(root_label), shape.root_role});

    std::unordered_map<std::string, NodeRole> roles{{tree.root, shape.root_role}};
    std::unordered_set<std::string> node_keys{tree.root};
    std::unordered_set<std::string> edge_ids;

    auto add_node = [&](const std::string& label, NodeRole role) {
        const std::string key = text_key(label);
        if (node_keys.insert(key).second) {
            tree.nodes.push_back(KnowledgeNode{key, trim(label), role});
            roles[key] = role;
        }
        return key;
    };
    auto add_edge = [&](const std::string& from, const std::string& to, EdgeKind kind) {
        if (from == to) {
            throw Error(ErrorKind::InvalidInput,
                        "payload fragment collapses onto another tree node: " + from);
        }
        KnowledgeEdge edge{from, to, kind};
        check_edge_roles(edge, roles);
        if (edge_ids.insert(edge.id()).second) tree.edges.push_back(edge);
    };

    if (extension.kind.tag == ExtensionKind::Tag::Temporal) {
        // Order states along time, then chain them through the root (the
        // present): past ... → root → ... future.
        std::vector<std::pair<int, std::string>> states;
        states.reserve(extension.payload.size());
        for (const auto& fragment : extension.payload) {
            states.push_back(parse_temporal_fragment(fragment));
        }
        std::stable_sort(states.begin(), states.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::string previous;
        bool root_placed = false;
        auto chain_to = [&](const std::string& key) {
            if (!previous.empty()) add_edge(previous, key, EdgeKind::Precedes);
            previous = key;
        };
        for (const auto& [offset, text] : states) {
            if (offset > 0 && !root_placed) {
                chain_to(tree.root);
                root_placed = true;
            }
            chain_to(add_node(text, NodeRole::State));
        }
        if (!root_placed) chain_to(tree.root);
    } else {
        for (const auto& fragment : extension.payload) {
            const std::string key = add_node(fragment, shape.child_role);
            if (key == tree.root) {
                throw Error(ErrorKind::InvalidInput,
                            "payload fragment coincides with the root: " + fragment);
            }
            if (shape.payload_to_root) {
                add_edge(key, tree.root, shape.edge_kind);
            } else {
                add_edge(tree.root, key, shape.edge_kind);
            }
        }
    }

    sort_nodes(tree.nodes);
    sort_edges(tree.edges);
    tree.id = tree_identity(tree.root, tree.kind, tree.edges);
    validate_tree(tree);
    return tree;
}

void validate_tree(const KnowledgeTree& tree) {
    if (tree.nodes.empty()) {
        throw Error(ErrorKind::InvalidInput, "tree has no nodes");
    }
    if (tree.edges.size() + 1 != tree.nodes.size()) {
        throw Error(ErrorKind::InvalidInput, "tree edge count must be node count minus one");
    }
    std::unordered_set<std::string> keys;
    for (const auto& node : tree.nodes) keys.insert(node.key);
    if (!keys.count(tree.root)) {
        throw Error(ErrorKind::InvalidInput, "tree root is not among its nodes");
    }
    std::unordered_map<std::string, std::vector<std::string>> undirected;
    for (const auto& edge : tree.edges) {
        if (edge.from == edge.to) {
            throw Error(ErrorKind::InvalidInput, "tree contains a self-loop");
        }
        if (!keys.count(edge.from) || !keys.count(edge.to)) {
            throw Error(ErrorKind::InvalidInput, "tree edge references missing node");
        }
        undirected[edge.from].push_back(edge.to);
        undirected[edge.to].push_back(edge.from);
    }
    std::unordered_set<std::string> seen{tree.root};
    std::deque<std::string> frontier{tree.root};
    while (!frontier.empty()) {
        const std::string key = frontier.front();
        frontier.pop_front();
        for (const auto& next : undirected[key]) {
            if (seen.insert(next).second) frontier.push_back(next);
        }
    }
    if (seen.size() != keys.size()) {
        throw Error(ErrorKind::InvalidInput, "tree has nodes disconnected from the root");
    }
}

KnowledgeNetwork network_from_tree(const KnowledgeTree& tree) {
    validate_tree(tree);
    KnowledgeNetwork network;
    network.nodes = tree.nodes;
    network.edges = tree.edges;
    for (const auto& edge : tree.edges) network.tree_provenance[edge.id()] = tree.id;
    network.tree_order.push_back(tree.id);
    check_acyclic(network.nodes, network.edges);
    return network;
}

KnowledgeNetwork merge(const KnowledgeNetwork& a, const KnowledgeNetwork& b) {
    KnowledgeNetwork out = a;

    std::unordered_map<std::string, std::string> label_by_key;
    for (const auto& node : out.nodes) label_by_key[node.key] = node.label;
    for (const auto& node : b.nodes) {
        auto it = label_by_key.find(node.key);
        if (it == label_by_key.end()) {
            out.nodes.push_back(node);
            label_by_key[node.key] = node.label;
            continue;
        }
        // Same key must mean same normalized label; the first-merged node
        // keeps its exact spelling and role.
        if (normalize(it->second) != normalize(node.label)) {
            throw Error(ErrorKind::IdentityCollision,
                        "node key " + node.key + " maps to both \"" + it->second + "\" and \"" +
                            node.label + "\"");
        }
    }
    sort_nodes(out.nodes);

    std::unordered_set<std::string> edge_ids;
    for (const auto& edge : out.edges) edge_ids.insert(edge.id());
    for (const auto& edge : b.edges) {
        if (!edge_ids.insert(edge.id()).second) continue;  // first-merged keeps provenance
        out.edges.push_back(edge);
    }
    sort_edges(out.edges);
    for (const auto& [edge_id, tree_id] : b.tree_provenance) {
        out.tree_provenance.try_emplace(edge_id, tree_id);
    }
    for (const auto& tree_id : b.tree_order) {
        if (std::find(out.tree_order.begin(), out.tree_order.end(), tree_id) ==
            out.tree_order.end()) {
            out.tree_order.push_back(tree_id);
        }
    }

    check_acyclic(out.nodes, out.edges);
    return out;
}

KnowledgeNetwork merge(const KnowledgeNetwork& network, const KnowledgeTree& tree) {
    return merge(network, network_from_tree(tree));
}

KnowledgeNetwork merge(const KnowledgeTree& a, const KnowledgeTree& b) {
    return merge(network_from_tree(a), network_from_tree(b));
}

std::vector<std::string> reachable(const KnowledgeNetwork& network, const std::string& from) {
    bool known = false;
    for (const auto& node : network.nodes) {
        if (node.key == from) {
            known = true;
            break;
        }
    }
    if (!known) {
        throw Error(ErrorKind::NotFound, "no node with key " + from);
    }
    std::unordered_map<std::string, std::vector<std::string>> adjacency;
    for (const auto& edge : network.edges) adjacency[edge.from].push_back(edge.to);
    std::unordered_set<std::string> seen;
    std::deque<std::string> frontier{from};
    while (!frontier.empty()) {
        const std::string key = frontier.front();
        frontier.pop_front();
        for (const auto& next : adjacency[key]) {
            if (next != from && seen.insert(next).second) frontier.push_back(next);
        }
    }
    std::vector<std::string> out(seen.begin(), seen.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::map<std::string, std::vector<std::string>> extension_sets(const KnowledgeNetwork& network) {
    std::map<std::string, std::vector<std::string>> sets;
    for (const auto& tree_id : network.tree_order) sets[tree_id];
    for (const auto& edge : network.edges) {
        sets[network.tree_provenance.at(edge.id())].push_back(edge.id());
    }
    for (auto& [_, edges] : sets) std::sort(edges.begin(), edges.end());
    return sets;
}

std::string network_to_json(const KnowledgeNetwork& network) {
    nlohmann::json doc;
    doc["nodes"] = nlohmann::json::array();
    for (const auto& node : network.nodes) {
        doc["nodes"].push_back(
            {{"key", node.key}, {"label", node.label}, {"role", node_role_label(node.role)}});
    }
    doc["edges"] = nlohmann::json::array();
    for (const auto& edge : network.edges) {
        doc["edges"].push_back({{"from", edge.from},
                                {"to", edge.to},
                                {"kind", edge_kind_label(edge.kind)},
                                {"tree", network.tree_provenance.at(edge.id())}});
    }
    return doc.dump(2);
}

std::string network_to_dot(const KnowledgeNetwork& network) {
    std::ostringstream out;
    out << "digraph knowledge {\n";
    for (const auto& node : network.nodes) {
        out << "  \"" << node.key << "\" [label=\"" << node.label << "\"];\n";
    }
    for (const auto& edge : network.edges) {
        out << "  \"" << edge.from << "\" -> \"" << edge.to << "\" [label=\""
            << edge_kind_label(edge.kind) << "\"];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace scopex
