#pragma once

#include <map>
#include <string>
#include <vector>

#include "scopex/extension.hpp"

namespace scopex {

enum class NodeRole { Question, Method, Context, Cause, State, Region };
std::string node_role_label(NodeRole role);

// Typed relations between knowledge nodes. The arrow always points along
// the relation's natural flow: a cause precedes its effect, a general
// question fans out to its specializations, an earlier state precedes a
// later one, a wider region contains a narrower one, an optimization
// transfers from its source stage outward.
enum class EdgeKind { Generalizes, Causes, Precedes, Contains, ScatterTransfer };
std::string edge_kind_label(EdgeKind kind);

struct KnowledgeNode {
    std::string key;  // hash of the normalized label
    std::string label;
    NodeRole role = NodeRole::Question;
};

struct KnowledgeEdge {
    std::string from;
    std::string to;
    EdgeKind kind = EdgeKind::Generalizes;

    std::string id() const;  // "from:kind:to"
};

// A rooted tree built from one extension: the anchor question as root and
// one node per payload fragment, wired by the extension kind's edge rule.
struct KnowledgeTree {
    std::string id;    // content hash over root, kind, and edges
    std::string root;  // node key
    ExtensionKind kind;
    std::vector<KnowledgeNode> nodes;  // sorted by key, unique
    std::vector<KnowledgeEdge> edges;  // sorted by id, unique
};

// Union of merged trees: still a DAG, with every edge remembering which
// tree introduced it first.
struct KnowledgeNetwork {
    std::vector<KnowledgeNode> nodes;  // sorted by key
    std::vector<KnowledgeEdge> edges;  // sorted by id
    std::map<std::string, std::string> tree_provenance;  // edge id → tree id
    std::vector<std::string> tree_order;                 // tree ids, merge order
};

// Builds the tree for one extension. Edge orientation by kind:
//   vertical      payload (cause) → root
//   horizontal    root → payload (parallel questions under a shared parent)
//   generalization payload (the broader question) → root
//   temporal      past chain → root → future chain, by past[k]/future[k] labels
//   spatial       payload (wider region) → root
//   scatter       root (source stage context) → payload stages
// Dynamic kinds have no edge rule and are rejected.
KnowledgeTree tree_from_extension(const std::string& root_label, const Extension& extension);

// Verifies tree shape: |E| = |V|−1, no self-loops, and every node connected
// to the root (edges read undirected — orientations deliberately differ by
// kind, so in-degree is not the criterion). Throws invalid-input on breach.
void validate_tree(const KnowledgeTree& tree);

KnowledgeNetwork network_from_tree(const KnowledgeTree& tree);

// Exact set union of nodes and edges; nodes fuse by key equality. Cycles
// are rejected (cycle-detected naming one cycle), as are key collisions
// between different normalized labels (identity-collision). Provenance of
// an edge present in both operands stays with the first-merged tree.
KnowledgeNetwork merge(const KnowledgeNetwork& a, const KnowledgeNetwork& b);
KnowledgeNetwork merge(const KnowledgeNetwork& network, const KnowledgeTree& tree);
KnowledgeNetwork merge(const KnowledgeTree& a, const KnowledgeTree& b);

// Keys of every node reachable from `from` along directed edges, sorted,
// excluding `from` itself. not-found for an unknown key.
std::vector<std::string> reachable(const KnowledgeNetwork& network, const std::string& from);

// Partitions the network's edges back to their originating trees: tree id →
// sorted edge ids. These are the per-tree extension-event sets the entropy
// metrics consume.
std::map<std::string, std::vector<std::string>> extension_sets(const KnowledgeNetwork& network);

// {"nodes":[{key,label,role}], "edges":[{from,to,kind,tree}]}, sorted.
std::string network_to_json(const KnowledgeNetwork& network);

// Graphviz digraph with edge kinds as edge labels.
std::string network_to_dot(const KnowledgeNetwork& network);

}  // namespace scopex
