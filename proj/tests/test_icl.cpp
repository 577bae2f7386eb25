#include <gtest/gtest.h>

#include <fstream>

#include "test_util.hpp"
#include "tpf/assets.hpp"
#include "tpf/qkvm.hpp"
#include "tpf/tgt.hpp"

using namespace tpf;

namespace {

struct Named {
    std::string name, x, y;
};

void PrintTo(const Named& n, std::ostream* os) { *os << n.name; }

std::vector<Named> nine() {
    std::ifstream in(testutil::fixture("nine_prompts.tsv"));
    std::vector<Named> out;
    for (std::string line; std::getline(in, line);) {
        auto a = line.find('\t'), b = line.find('\t', a + 1);
        out.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)});
    }
    return out;
}

const IclPipeline& icl() {
    static const IclPipeline p = IclPipeline::from_assets();
    return p;
}

}  // namespace

class NinePrompts : public ::testing::TestWithParam<Named> {};

TEST_P(NinePrompts, GoldAndSymbolicAgree) {
    const auto& c = GetParam();
    GenerateOptions o;
    o.collect_stats = true;
    auto toks = tokenize(c.x);
    auto r = icl().run(toks, o);
    EXPECT_EQ(join_tokens(r.tokens), c.y);
    EXPECT_FALSE(r.truncated);
    EXPECT_LE(r.stats.max_delta_hat, 1.0 + 1e-9);
    QkvmOptions qo;
    qo.max_position = static_cast<int>(toks.size()) + o.max_new + 1;
    EXPECT_EQ(qkvm_generate(icl().program(), toks, ".", o.max_new, qo).tokens, r.tokens);
}

INSTANTIATE_TEST_SUITE_P(Prompts, NinePrompts, ::testing::ValuesIn(nine()), [](const auto& info) {
    std::string n;
    for (char ch : info.param.name) n += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
    return n;
});

TEST(Icl, NinePromptFixtureIsComplete) { EXPECT_EQ(nine().size(), 9u); }

TEST(Icl, RandomPromptsMatchSymbolicMachine) {
    auto recs = tgt::generate_split(tgt::parse_task("1_shot_rlw"), tgt::parse_split("test"), 20, 77);
    for (const auto& rec : recs) {
        auto toks = tokenize(rec.x);
        auto got = icl().run_icl(rec.x);
        QkvmOptions qo;
        qo.max_position = static_cast<int>(toks.size()) + 65;
        auto sym = qkvm_generate(icl().program(), toks, ".", 64, qo);
        EXPECT_EQ(got, sym.tokens) << rec.x;
        EXPECT_EQ(join_tokens(got), rec.y) << rec.x;
    }
}

// The parse program reads its template from the first example only, so
// multi-shot prompts are generated and validated but not claimed to be solved.
TEST(Icl, TwoShotRecordsAreWellFormed) {
    auto recs = tgt::generate_split(tgt::parse_task("2_shot_rlw"), tgt::parse_split("test"), 5, 3);
    for (const auto& rec : recs) EXPECT_TRUE(tgt::validate_record(rec).empty()) << rec.x;
}
