#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "scopex/extension.hpp"
#include "scopex/scripted_backend.hpp"
#include "scopex/text.hpp"
#include "support.hpp"

using namespace scopex;

namespace {

bool throws_kind(ErrorKind kind, const std::function<void()>& body) {
    try {
        body();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

PromptTemplates test_templates() {
    return PromptTemplates({
        {"vertical", "causes of: {question}"},
        {"horizontal", "up to {n} neighbors of: {question}"},
        {"generalize", "broaden: {question}"},
        {"scatter", "transfer {optimization} from {source_stage} to {stage}"},
        {"predict_future", "future of: {input}"},
    });
}

}  // namespace

TEST_CASE("extension kind labels round-trip through from_label") {
    const ExtensionKind kinds[] = {
        ExtensionKind::vertical(),     ExtensionKind::horizontal(),
        ExtensionKind::generalization(), ExtensionKind::temporal(),
        ExtensionKind::spatial(),      ExtensionKind::scatter(),
        ExtensionKind::dynamic("weather"),
    };
    for (const auto& kind : kinds) {
        CHECK(ExtensionKind::from_label(kind.label()) == kind);
    }
    CHECK(ExtensionKind::dynamic("weather").label() == "dynamic:weather");
    CHECK(throws_kind(ErrorKind::ParseError, [] { ExtensionKind::from_label("diagonal"); }));
    CHECK(throws_kind(ErrorKind::InvalidInput, [] { ExtensionKind::dynamic("  "); }));
}

TEST_CASE("extension ids hash kind, anchor, and payload") {
    Extension a{ExtensionKind::vertical(), "anchor1", {"p1", "p2"}, 1.0,
                Extension::Source::ModelGenerated};
    Extension same = a;
    CHECK(a.id() == same.id());

    Extension other_kind = a;
    other_kind.kind = ExtensionKind::horizontal();
    CHECK(a.id() != other_kind.id());

    Extension other_payload = a;
    other_payload.payload = {"p1p2"};
    CHECK(a.id() != other_payload.id());

    Extension split_differently = a;
    split_differently.payload = {"p1", "p", "2"};
    CHECK(a.id() != split_differently.id());

    // Weight and source are mutable annotations, not identity.
    Extension reweighted = a;
    reweighted.weight = 0.5;
    reweighted.source = Extension::Source::UserSupplied;
    CHECK(a.id() == reweighted.id());
}

TEST_CASE("prompt templates render placeholders and reject unknown keys") {
    const PromptTemplates templates = test_templates();
    CHECK(templates.render("vertical", {{"question", "why?"}}) == "causes of: why?");
    CHECK(throws_kind(ErrorKind::ConfigError, [&] { templates.render("nope", {}); }));
}

TEST_CASE("prompt templates load from JSON files") {
    testutil::TempDir dir;
    const std::string path = dir.file("templates.json");
    testutil::write_file(path, R"({"vertical": "V {question}", "horizontal": "H {n}"})");
    const PromptTemplates templates = PromptTemplates::from_file(path);
    CHECK(templates.render("vertical", {{"question", "q"}}) == "V q");

    CHECK(throws_kind(ErrorKind::IoError, [] { PromptTemplates::from_file("/nonexistent.json"); }));
    const std::string bad = dir.file("bad.json");
    testutil::write_file(bad, "[1,2,3]");
    CHECK(throws_kind(ErrorKind::ConfigError, [&] { PromptTemplates::from_file(bad); }));
    const std::string nonstring = dir.file("nonstring.json");
    testutil::write_file(nonstring, R"({"vertical": 5})");
    CHECK(throws_kind(ErrorKind::ConfigError, [&] { PromptTemplates::from_file(nonstring); }));
}

TEST_CASE("vertical extension splits the gateway reply into cause fragments") {
    testutil::FakeGateway gateway;
    gateway.on_prompt("causes of: why is it slow?", "cold cache\n  missing index  \n\n");
    const Extension ext = extend_vertical("why is it slow?", gateway, test_templates());
    CHECK(ext.kind == ExtensionKind::vertical());
    CHECK(ext.anchor == text_key("why is it slow?"));
    CHECK(ext.payload == std::vector<std::string>{"cold cache", "missing index"});
    CHECK(ext.source == Extension::Source::ModelGenerated);
    CHECK(ext.weight == doctest::Approx(1.0));
}

TEST_CASE("vertical extension propagates emptiness and bad input") {
    testutil::FakeGateway gateway;
    gateway.on_prompt("causes of:", "   \n \n");
    CHECK(throws_kind(ErrorKind::ExtensionEmpty,
                      [&] { extend_vertical("why?", gateway, test_templates()); }));
    CHECK(throws_kind(ErrorKind::InvalidInput,
                      [&] { extend_vertical("  ", gateway, test_templates()); }));
}

TEST_CASE("user-supplied vertical extensions skip the gateway") {
    const Extension ext = vertical_from_user("why?", {"because"});
    CHECK(ext.source == Extension::Source::UserSupplied);
    CHECK(ext.payload == std::vector<std::string>{"because"});
    CHECK(throws_kind(ErrorKind::ExtensionEmpty, [] { vertical_from_user("why?", {}); }));
}

TEST_CASE("horizontal extension caps the neighbor count at n") {
    testutil::FakeGateway gateway;
    gateway.on_prompt("neighbors of:", "n1\nn2\nn3\nn4");
    const Extension two = extend_horizontal("q?", gateway, test_templates(), 2);
    CHECK(two.payload == std::vector<std::string>{"n1", "n2"});
    CHECK(two.kind == ExtensionKind::horizontal());

    const Extension many = extend_horizontal("q?", gateway, test_templates(), 10);
    CHECK(many.payload.size() == 4);

    CHECK(throws_kind(ErrorKind::InvalidInput,
                      [&] { extend_horizontal("q?", gateway, test_templates(), 0); }));
}

TEST_CASE("the horizontal prompt communicates the requested count") {
    testutil::FakeGateway inner;
    inner.on_prompt("neighbors of:", "n1");
    testutil::RecordingGateway gateway(inner);
    extend_horizontal("q?", gateway, test_templates(), 7);
    REQUIRE(gateway.generate_prompts.size() == 1);
    CHECK(gateway.generate_prompts[0] == "up to 7 neighbors of: q?");
}

TEST_CASE("generalization pushes method applicability up to the broader question") {
    testutil::FakeGateway gateway;
    gateway.on_prompt("broaden: how do I sort integers?", "how do I sort anything?");
    gateway.set_default_embedding({1.0, 0.0});

    MethodStore store(2);
    const std::string method_id =
        store.add_method("how do I sort integers?", "use counting sort", {}, gateway);
    store.record_applicability(method_id, text_key("how do I sort integers?"));

    const GeneralizationResult result =
        generalize("how do I sort integers?", gateway, test_templates(), store);
    CHECK(result.generalized_question == "how do I sort anything?");
    REQUIRE(result.containment_report == std::vector<std::string>{method_id});

    // Containment: every method applicable to q is now applicable to q_g.
    const auto mq = store.methods_applicable_to(text_key("how do I sort integers?"));
    const auto mqg = store.methods_applicable_to(text_key("how do I sort anything?"));
    for (const auto& id : mq) {
        CHECK(std::find(mqg.begin(), mqg.end(), id) != mqg.end());
    }
}

TEST_CASE("generalization that changes nothing is an error, not a loop") {
    testutil::FakeGateway gateway;
    gateway.on_prompt("broaden:", "  THE   question? ");
    MethodStore store(2);
    CHECK(throws_kind(ErrorKind::NoGeneralization,
                      [&] { generalize("the question?", gateway, test_templates(), store); }));
}

TEST_CASE("generalization_to_extension wraps the broader question") {
    const Extension ext = generalization_to_extension("narrow?", "  broader?  ");
    CHECK(ext.kind == ExtensionKind::generalization());
    CHECK(ext.payload == std::vector<std::string>{"broader?"});
    CHECK(ext.anchor == text_key("narrow?"));
    CHECK(throws_kind(ErrorKind::ExtensionEmpty,
                      [] { generalization_to_extension("narrow?", " "); }));
}

TEST_CASE("temporal extension labels history and future by distance from now") {
    const Extension ext = extend_temporal("state now", {"oldest", "recent"}, {"next", "later"});
    CHECK(ext.kind == ExtensionKind::temporal());
    REQUIRE(ext.payload.size() == 4);
    CHECK(ext.payload[0] == "past[2]: oldest");
    CHECK(ext.payload[1] == "past[1]: recent");
    CHECK(ext.payload[2] == "future[1]: next");
    CHECK(ext.payload[3] == "future[2]: later");
    CHECK(ext.source == Extension::Source::UserSupplied);

    const Extension history_only = extend_temporal("now", {"before"}, {});
    CHECK(history_only.payload == std::vector<std::string>{"past[1]: before"});

    CHECK(throws_kind(ErrorKind::ExtensionEmpty, [] { extend_temporal("now", {}, {}); }));
}

TEST_CASE("predict_future returns the gateway's nearest-first states") {
    testutil::FakeGateway gateway;
    gateway.on_prompt("future of: now", "soon\nlater");
    CHECK(predict_future("now", gateway, test_templates()) ==
          std::vector<std::string>{"soon", "later"});

    testutil::FakeGateway silent;
    silent.on_prompt("future of:", "\n\n");
    CHECK(throws_kind(ErrorKind::ExtensionEmpty,
                      [&] { predict_future("now", silent, test_templates()); }));
}

TEST_CASE("spatial extension wraps the wider context") {
    const Extension ext = extend_spatial("what happens in this room?", "  the whole building  ");
    CHECK(ext.kind == ExtensionKind::spatial());
    CHECK(ext.payload == std::vector<std::string>{"the whole building"});
    CHECK(throws_kind(ErrorKind::ExtensionEmpty, [] { extend_spatial("q?", "  "); }));
}

TEST_CASE("scatter deduplicates stages, skips the source, and keeps input order") {
    testutil::FakeGateway gateway;
    gateway.on_prompt("to compile", "applicable because both parse sources");
    gateway.on_prompt("to test", "not-applicable since tests run downstream");
    gateway.on_prompt("to deploy", "Applicable: ships the same artifact");

    const auto verdicts = scatter("cache invalidation tweak", "build",
                                  {"compile", "test", "BUILD", "deploy", "Compile"}, gateway,
                                  test_templates());
    REQUIRE(verdicts.size() == 3);
    CHECK(verdicts[0].stage == "compile");
    CHECK(verdicts[0].verdict == ScatterVerdictKind::Applicable);
    CHECK(verdicts[1].stage == "test");
    CHECK(verdicts[1].verdict == ScatterVerdictKind::NotApplicable);
    CHECK(verdicts[2].stage == "deploy");
    CHECK(verdicts[2].verdict == ScatterVerdictKind::Applicable);
    CHECK(verdict_label(verdicts[0].verdict) == "applicable");
    CHECK(verdict_label(verdicts[1].verdict) == "not-applicable");
}

TEST_CASE("scatter failures name the stage that failed") {
    testutil::FakeGateway gateway;
    gateway.on_prompt("to compile", "applicable");
    // No rule covers the "test" stage prompt.
    try {
        scatter("tweak", "build", {"compile", "test"}, gateway, test_templates());
        FAIL("expected a gateway error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::GatewayError);
        CHECK(std::string(e.what()).find("test") != std::string::npos);
    }

    testutil::FakeGateway vague;
    vague.on_prompt("to compile", "maybe, hard to say");
    try {
        scatter("tweak", "build", {"compile"}, vague, test_templates());
        FAIL("expected a gateway error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::GatewayError);
        CHECK(std::string(e.what()).find("compile") != std::string::npos);
    }
}

TEST_CASE("scatter input validation") {
    testutil::FakeGateway gateway;
    CHECK(throws_kind(ErrorKind::InvalidInput,
                      [&] { scatter(" ", "build", {"compile"}, gateway, test_templates()); }));
    CHECK(throws_kind(ErrorKind::InvalidInput,
                      [&] { scatter("tweak", "build", {}, gateway, test_templates()); }));
}

TEST_CASE("scatter_to_extension keeps only the applicable stages") {
    const std::vector<ScatterVerdict> verdicts = {
        {"compile", ScatterVerdictKind::Applicable, "yes"},
        {"test", ScatterVerdictKind::NotApplicable, "no"},
        {"deploy", ScatterVerdictKind::Applicable, "yes"},
    };
    const Extension ext = scatter_to_extension("tweak", verdicts);
    CHECK(ext.kind == ExtensionKind::scatter());
    CHECK(ext.payload == std::vector<std::string>{"compile", "deploy"});
    CHECK(ext.anchor == text_key("tweak"));

    const std::vector<ScatterVerdict> none = {{"test", ScatterVerdictKind::NotApplicable, "no"}};
    CHECK(throws_kind(ErrorKind::ExtensionEmpty, [&] { scatter_to_extension("tweak", none); }));
}

TEST_CASE("compose concatenates fragments after the original question") {
    const Extension vertical{ExtensionKind::vertical(), "a", {"c1", "c2"}, 1.0,
                             Extension::Source::ModelGenerated};
    const Extension spatial{ExtensionKind::spatial(), "a", {"wider"}, 1.0,
                            Extension::Source::UserSupplied};
    const ExtendedQuestion extended = compose("the question?", {vertical, spatial});
    CHECK(extended.original == "the question?");
    CHECK(extended.composed ==
          "the question?\n---\n[[vertical]] c1\nc2\n---\n[[spatial]] wider");
    // The original is always a strict prefix of the composed text.
    CHECK(extended.composed.rfind(extended.original, 0) == 0);
    CHECK(extended.composed.size() > extended.original.size());

    const ExtendedQuestion identity = compose("just this", {});
    CHECK(identity.composed == "just this");

    CHECK(throws_kind(ErrorKind::InvalidInput, [&] {
        compose("q", {Extension{ExtensionKind::vertical(), "a", {}, 1.0,
                                Extension::Source::ModelGenerated}});
    }));
}

TEST_CASE("parse_composed inverts compose") {
    const Extension vertical{ExtensionKind::vertical(), text_key("the question?"),
                             {"c1", "c2"}, 1.0, Extension::Source::ModelGenerated};
    const Extension dynamic{ExtensionKind::dynamic("weather"), text_key("the question?"),
                            {"raining"}, 1.0, Extension::Source::UserSupplied};
    const ExtendedQuestion extended = compose("the question?", {vertical, dynamic});

    const ExtendedQuestion parsed = parse_composed(extended.composed);
    CHECK(parsed.original == extended.original);
    CHECK(parsed.composed == extended.composed);
    REQUIRE(parsed.fragments.size() == 2);
    CHECK(parsed.fragments[0].kind == vertical.kind);
    CHECK(parsed.fragments[0].payload == vertical.payload);
    CHECK(parsed.fragments[0].anchor == text_key("the question?"));
    CHECK(parsed.fragments[1].kind == dynamic.kind);
    CHECK(parsed.fragments[1].payload == dynamic.payload);

    const ExtendedQuestion plain = parse_composed("no extensions here");
    CHECK(plain.original == "no extensions here");
    CHECK(plain.fragments.empty());
}

TEST_CASE("parse_composed round-trips randomized extension stacks") {
    std::mt19937_64 rng(424242);
    std::uniform_int_distribution<int> kind_pick(0, 5);
    std::uniform_int_distribution<int> frag_count(1, 4);
    std::uniform_int_distribution<int> ext_count(0, 5);
    const ExtensionKind kinds[] = {ExtensionKind::vertical(),       ExtensionKind::horizontal(),
                                   ExtensionKind::generalization(), ExtensionKind::temporal(),
                                   ExtensionKind::spatial(),        ExtensionKind::scatter()};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Extension> extensions;
        const int n = ext_count(rng);
        for (int i = 0; i < n; ++i) {
            Extension ext;
            ext.kind = kinds[kind_pick(rng)];
            ext.anchor = text_key("question " + std::to_string(trial));
            for (int f = 0, fn = frag_count(rng); f < fn; ++f) {
                ext.payload.push_back("fragment " + std::to_string(trial) + "-" +
                                      std::to_string(i) + "-" + std::to_string(f));
            }
            extensions.push_back(std::move(ext));
        }
        const ExtendedQuestion composed =
            compose("question " + std::to_string(trial), extensions);
        const ExtendedQuestion parsed = parse_composed(composed.composed);
        CHECK(parsed.original == composed.original);
        REQUIRE(parsed.fragments.size() == extensions.size());
        for (std::size_t i = 0; i < extensions.size(); ++i) {
            CHECK(parsed.fragments[i].kind == extensions[i].kind);
            CHECK(parsed.fragments[i].payload == extensions[i].payload);
        }
    }
}

TEST_CASE("parse_composed rejects malformed fragments") {
    CHECK(throws_kind(ErrorKind::ParseError, [] { parse_composed("q\n---\nno marker"); }));
    CHECK(throws_kind(ErrorKind::ParseError, [] { parse_composed("q\n---\n[[vertical broken"); }));
    CHECK(throws_kind(ErrorKind::ParseError, [] { parse_composed("q\n---\n[[vertical]] "); }));
    CHECK(throws_kind(ErrorKind::ParseError, [] { parse_composed("q\n---\n[[diagonal]] x"); }));
}

TEST_CASE("extension weights project ids onto coverage") {
    Extension e1{ExtensionKind::vertical(), "a", {"p1"}, 1.0, Extension::Source::ModelGenerated};
    Extension e2{ExtensionKind::spatial(), "a", {"p2"}, 1.0, Extension::Source::UserSupplied};
    const CoverageMap coverage = {{e1.id(), {"q1", "q2"}}, {e2.id(), {"q2"}}};
    const Distribution dist = extension_weights(std::vector<Extension>{e1, e2}, coverage);
    REQUIRE(dist.outcomes.size() == 2);
    CHECK(dist.outcomes[0] == e1.id());
    CHECK(dist.weights[0] > dist.weights[1]);
}

TEST_CASE("registry starts with the built-in kinds common") {
    const ExtensionRegistry registry;
    for (const char* kind :
         {"vertical", "horizontal", "generalization", "temporal", "spatial", "scatter"}) {
        CHECK(registry.is_common(kind));
    }
    CHECK(registry.dynamic_counts().empty());
    CHECK(registry.promotion_threshold() == 3);
}

TEST_CASE("dynamic kinds promote to common after threshold uses") {
    ExtensionRegistry registry;
    registry.register_dynamic("weather");
    CHECK_FALSE(registry.is_common("weather"));
    CHECK(registry.dynamic_counts().at("weather") == 0);

    registry.note_usage("weather");
    registry.note_usage("weather");
    CHECK_FALSE(registry.is_common("weather"));
    registry.note_usage("weather");
    CHECK(registry.is_common("weather"));
    CHECK(registry.dynamic_counts().count("weather") == 0);

    // Once common, more usage is a quiet no-op.
    CHECK_NOTHROW(registry.note_usage("weather"));
}

TEST_CASE("registry rejects double registration into common and unknown usage") {
    ExtensionRegistry registry;
    CHECK(throws_kind(ErrorKind::AlreadyCommon, [&] { registry.register_dynamic("vertical"); }));
    CHECK_NOTHROW(registry.register_dynamic("niche"));
    CHECK_NOTHROW(registry.register_dynamic("niche"));  // idempotent
    CHECK(registry.dynamic_counts().at("niche") == 0);
    CHECK(throws_kind(ErrorKind::NotFound, [&] { registry.note_usage("unregistered"); }));
    CHECK(throws_kind(ErrorKind::InvalidInput, [&] { registry.register_dynamic("  "); }));
}

TEST_CASE("registry persists and reloads its state") {
    testutil::TempDir dir;
    const std::string path = dir.file("registry.json");
    ExtensionRegistry registry;
    registry.register_dynamic("weather");
    registry.note_usage("weather");
    registry.save(path);

    const ExtensionRegistry loaded = ExtensionRegistry::load(path);
    CHECK(loaded.is_common("vertical"));
    CHECK(loaded.dynamic_counts().at("weather") == 1);
    CHECK(loaded.promotion_threshold() == 3);

    CHECK(throws_kind(ErrorKind::IoError, [] { ExtensionRegistry::load("/nonexistent.json"); }));
}

TEST_CASE("registry construction validates separation of common and dynamic") {
    CHECK(throws_kind(ErrorKind::InvalidInput, [] {
        ExtensionRegistry({"vertical"}, {{"vertical", 0}}, 3);
    }));
    CHECK(throws_kind(ErrorKind::InvalidInput, [] { ExtensionRegistry({}, {}, 0); }));
    CHECK(throws_kind(ErrorKind::InvalidInput, [] { ExtensionRegistry({}, {{"x", -1}}, 3); }));
}
