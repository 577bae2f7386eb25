#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tpf/assets.hpp"
#include "tpf/qkvl.hpp"

using namespace tpf;
using nlohmann::ordered_json;

namespace {

const QkvlProgram& parse_prog() {
    static const QkvlProgram p = load_program("parse");
    return p;
}

const QkvlProgram& icl_prog() {
    static const QkvlProgram p = load_program("icl");
    return p;
}

void expect_golden(const std::string& needle, const std::string& file) {
    const auto* e = testutil::find_entry(parse_prog().entries, needle);
    ASSERT_NE(e, nullptr) << needle;
    auto want = ordered_json::parse(testutil::slurp(testutil::fixture(file)));
    EXPECT_EQ(testutil::entry_json(parse_prog(), *e), want) << testutil::entry_json(parse_prog(), *e).dump(2);
}

QkvlProgram compile_text(const std::string& body) {
    return compile_source(R"(registers { position: "p", symbol: "s", region: "r", field: "f", parse: "a" }
constants { R_INIT: "R", XQ, CQ }
system { symbol: symbol, position: position, parse: parse }
)" + body);
}

}  // namespace

TEST(Compiler, GoldenPre1) { expect_golden("step pre 1.", "golden_pre1.json"); }
TEST(Compiler, Golden1b) { expect_golden("step 1b.", "golden_1b.json"); }
TEST(Compiler, GoldenRepeat2a) { expect_golden("repeat pre_2a, 2a.", "golden_repeat_2a.json"); }

TEST(Compiler, ProductionEight) {
    const auto* e = testutil::find_entry(parse_prog().entries, "step 8.");
    ASSERT_NE(e, nullptr);
    using S = SourceSpec;
    RegisterDict q{{"r*`", S::value("XQ")}, {"r`", S::value("XQ")}, {"t*`", S::value("D")}, {"t`", S::value("C")},
                   {"r", S::value("r")},    {"t*", S::value("t*")}, {"t", S::value("t")},     {"f*`", S::value("f*")},
                   {"a", S::value("a")}};
    RegisterDict k{{"r*`", S::value("r*")}, {"r`", S::value("r")}, {"t*`", S::value("t*")}, {"t`", S::value("t")},
                   {"r", S::value("CQ")},   {"t*", S::value("D")}, {"t", S::value("C")},    {"f*`", S::value("f*")},
                   {"a", S::value("1")}};
    EXPECT_EQ(e->layer.q, q);
    EXPECT_EQ(e->layer.k, k);
    EXPECT_EQ(e->layer.v, (RegisterDict{{"f", S::value("f")}}));
}

TEST(Compiler, LayerCounts) {
    EXPECT_EQ(icl_prog().layer_count(), 31u);
    EXPECT_EQ(load_program("parse").layer_count(), 24u);
    EXPECT_EQ(load_program("gen").layer_count(), 7u);
}

TEST(Compiler, KeysetsMatchAndPhaseGate) {
    std::function<void(const std::vector<QkvlEntry>&)> walk = [&](const std::vector<QkvlEntry>& es) {
        for (const auto& e : es) {
            if (e.is_repeat) {
                walk(e.body);
                continue;
            }
            const auto& L = e.layer;
            ASSERT_FALSE(L.q.empty()) << L.comment;
            ASSERT_EQ(L.q.size(), L.k.size()) << L.comment;
            for (size_t i = 0; i < L.q.size(); ++i) EXPECT_EQ(L.q[i].first, L.k[i].first) << L.comment;
            bool parse = L.comment.find("parse") != std::string::npos;
            auto qa = std::find_if(L.q.begin(), L.q.end(), [](auto& x) { return x.first == "a"; });
            auto ka = std::find_if(L.k.begin(), L.k.end(), [](auto& x) { return x.first == "a"; });
            ASSERT_NE(qa, L.q.end()) << L.comment;
            EXPECT_EQ(qa->second, SourceSpec::value("a"));
            EXPECT_EQ(ka->second, SourceSpec::value(parse ? "1" : "0")) << L.comment;
        }
    };
    walk(icl_prog().entries);
}

TEST(Compiler, ConditionForms) {
    auto q = compile_text(R"(causal_attn: true
// c
where_rm region[n] != XQ and region[N] in [XQ, CQ] and field[N] not in [R_INIT] and symbol[N] == position[n]:
    field[N] = R_INIT
    symbol[N] = symbol[n]
)");
    ASSERT_EQ(q.entries.size(), 1u);
    const auto& L = q.entries[0].layer;
    EXPECT_TRUE(L.causal_attn);
    EXPECT_TRUE(L.right_match);
    using S = SourceSpec;
    RegisterDict want_q{{"r`", S::not_equal("XQ")}, {"r", S::value("r")}, {"f", S::value("f")}, {"p`", S::value("s")}};
    RegisterDict want_k{{"r`", S::value("r")},
                        {"r", S{S::Kind::In, {"XQ", "CQ"}}},
                        {"f", S{S::Kind::NotIn, {"R"}}},
                        {"p`", S::value("p")}};
    EXPECT_EQ(L.q, want_q);
    EXPECT_EQ(L.k, want_k);
    EXPECT_EQ(L.v, (RegisterDict{{"f", S::value("R")}, {"s", S::value("s")}}));
}

TEST(Compiler, Errors) {
    EXPECT_THROW(compile_text("where symbol[n] == field[n]:\n    field[N] = 1\n"), CompileError);
    EXPECT_THROW(compile_text("where symbol[N] == 1:\n    field[N] = 1\n    field[N] = 2\n"), CompileError);
}

TEST(Compiler, Deterministic) {
    EXPECT_EQ(serialize_qkvl(load_program("icl")), serialize_qkvl(load_program("icl")));
}

TEST(QkvlJson, RoundTrip) {
    auto text = serialize_qkvl(icl_prog());
    EXPECT_EQ(deserialize_qkvl(text), icl_prog());
    auto j = ordered_json::parse(text);
    auto first = j["weights"][0];
    std::vector<std::string> keys;
    for (auto it = first.begin(); it != first.end(); ++it) keys.push_back(it.key());
    EXPECT_EQ(keys, (std::vector<std::string>{"layer_comment", "causal_attn", "right_match", "weights"}));
}

TEST(QkvlJson, SampleRepeatDictionary) {
    auto prog = icl_prog();
    prog.entries.clear();
    auto j = ordered_json::parse(serialize_qkvl(prog));
    j["weights"].push_back(ordered_json::parse(testutil::slurp(testutil::fixture("golden_repeat_2a.json"))));
    auto back = deserialize_qkvl(j.dump());
    ASSERT_EQ(back.entries.size(), 1u);
    EXPECT_TRUE(back.entries[0].is_repeat);
    EXPECT_EQ(back.entries[0].body.size(), 2u);
    EXPECT_EQ(back.layer_count(), 2u);
}

TEST(QkvlJson, EmptyAndMalformed) {
    auto prog = icl_prog();
    prog.entries.clear();
    EXPECT_EQ(deserialize_qkvl(serialize_qkvl(prog)).layer_count(), 0u);
    EXPECT_THROW(deserialize_qkvl("{"), CompileError);
    auto j = ordered_json::parse(serialize_qkvl(prog));
    j["surprise"] = 1;
    EXPECT_THROW(deserialize_qkvl(j.dump()), CompileError);
}
