#include <gtest/gtest.h>

#include <json.hpp>
#include <random>
#include <set>

#include "oracles/segment_oracle.hpp"
#include "record_mutation.hpp"
#include "test_util.hpp"
#include "tpf/tgt.hpp"

using namespace tpf::tgt;

namespace {

bool valid(const std::string& x, const std::string& y) { return validate_record({x, y, ""}).empty(); }

std::string first_kind(const std::string& x, const std::string& y) {
    auto v = validate_record({x, y, ""});
    return v.empty() ? "" : v[0].kind;
}

}  // namespace

TEST(Tgt, DelimiterPool) {
    const auto& p = delimiter_pool();
    EXPECT_EQ(p.size(), 31u);
    EXPECT_EQ(std::count(p.begin(), p.end(), "."), 0);
    for (const auto& s : p) EXPECT_FALSE(std::isalnum(static_cast<unsigned char>(s[0])));
}

TEST(Tgt, TemplateShape) {
    Rng rng(9);
    for (int n : {1, 2, 4, 7, 10}) {
        for (int t = 0; t < 50; ++t) {
            auto tp = sample_template(rng, n);
            EXPECT_EQ(tp.q_count(), n);
            EXPECT_GE(tp.a_count(), 1);
            EXPECT_LE(tp.a_count(), n);
            EXPECT_FALSE(tp.q_fields.front().delimiter);
            for (size_t i = 1; i < tp.q_fields.size(); ++i)
                EXPECT_NE(tp.q_fields[i].delimiter, tp.q_fields[i - 1].delimiter);
            std::set<int> slots;
            for (const auto& f : tp.a_fields)
                if (!f.delimiter) EXPECT_TRUE(slots.insert(f.slot).second);
            std::set<std::string> qsyms;
            for (const auto& f : tp.q_fields)
                for (const auto& s : f.value) EXPECT_TRUE(qsyms.insert(s).second);
        }
    }
    EXPECT_THROW(sample_template(rng, 0), TgtError);
}

TEST(Tgt, TaskAndSplitNames) {
    EXPECT_EQ(parse_task("1_shot_rlw").n_shot, 1);
    EXPECT_EQ(parse_task("3_shot_eng").mode, SymbolMode::Eng);
    EXPECT_THROW(parse_task("one_shot"), TgtError);
    EXPECT_EQ(split_names().size(), 12u);
    EXPECT_EQ(parse_split("ood_cons_len_7").lens, std::vector<int>{7});
    EXPECT_EQ(parse_split("ood_cons_count_10").counts, std::vector<int>{10});
    EXPECT_TRUE(parse_split("ood_lexical").lexical);
    EXPECT_TRUE(parse_split("train").echo);
    EXPECT_THROW(parse_split("holdout"), TgtError);
}

TEST(Tgt, GenerationIsDeterministicPerSeed) {
    auto task = parse_task("1_shot_rlw");
    auto a = generate_split(task, parse_split("test"), 50, 1);
    auto b = generate_split(task, parse_split("test"), 50, 1);
    auto c = generate_split(task, parse_split("test"), 50, 2);
    auto d = generate_split(task, parse_split("dev"), 50, 1);
    ASSERT_EQ(a.size(), 50u);
    for (size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].x, b[i].x);
        EXPECT_EQ(a[i].info, b[i].info);
    }
    EXPECT_NE(a[0].x, c[0].x);
    EXPECT_NE(a[0].x, d[0].x);
}

TEST(Tgt, SplitCharacteristics) {
    auto task = parse_task("1_shot_rlw");
    for (const auto& r : generate_split(task, parse_split("ood_cons_len_7"), 30, 4)) {
        auto info = nlohmann::json::parse(r.info);
        for (const auto& l : info["q_cons_lens"])
            for (int k : l) EXPECT_EQ(k, 7);
    }
    for (const auto& r : generate_split(task, parse_split("ood_cons_count_7"), 30, 4)) {
        auto info = nlohmann::json::parse(r.info);
        EXPECT_EQ(info["cons_count"].get<std::string>().substr(0, 3), "Q7A");
        EXPECT_EQ(info["q_cons_lens"][0].size(), 7u);
    }
    for (const auto& r : generate_split(task, parse_split("ood_lexical"), 30, 4))
        for (const auto& w : oracle::words(r.y))
            if (std::isalpha(static_cast<unsigned char>(w[0]))) EXPECT_TRUE(std::isupper(static_cast<unsigned char>(w[0])));
    int echo = 0;
    auto train = generate_split(task, parse_split("train"), 1000, 4);
    for (const auto& r : train) echo += r.info.find("echo") != std::string::npos;
    EXPECT_GT(echo, 60);
    EXPECT_LT(echo, 140);
}

TEST(Tgt, InfoDescribesRecord) {
    auto r = generate_split(parse_task("2_shot_rlw"), parse_split("test"), 1, 8)[0];
    auto info = nlohmann::json::parse(r.info);
    auto cc = info["cons_count"].get<std::string>();
    EXPECT_EQ(cc[0], 'Q');
    EXPECT_EQ(info["q_cons_lens"].size(), 3u);  // two examples and the cue
    auto cl = info["cons_len"].get<std::string>();
    EXPECT_EQ(std::count(cl.begin(), cl.end(), '.'), 2);
    for (int s : info["a_slots"]) {
        EXPECT_GE(s, 1);
        EXPECT_LE(s, static_cast<int>(info["q_cons_lens"][0].size()));
    }
}

TEST(Tgt, GeneratedRecordsValidate) {
    for (const auto& task : {"1_shot_rlw", "2_shot_rlw", "1_shot_eng"})
        for (const auto& split : split_names())
            for (const auto& r : generate_split(parse_task(task), parse_split(split), 60, 13)) {
                auto v = validate_record(r);
                EXPECT_TRUE(v.empty()) << task << "/" << split << ": " << r.x << " => " << r.y << " : "
                                       << (v.empty() ? "" : v[0].kind + " " + v[0].detail);
            }
}

TEST(Tgt, ValidatorExamples) {
    EXPECT_TRUE(valid("Q B V D E A D E V B . Q F G H V K L A", "K L V F G H ."));
    EXPECT_TRUE(valid("Q - his green bird A his green bird . Q - some light monkey A", "some light monkey ."));
    EXPECT_EQ(first_kind("Q B V D E A D E V B . Q F G H V K L A", "K L V F G ."), "gold mismatch");
    EXPECT_EQ(first_kind("Q B V B A B . Q F V G A", "G ."), "symbol repetition");
    EXPECT_EQ(first_kind("Q B V D A D V B . Q F W G A", "G W F ."), "answer constituent mismatch");
    EXPECT_EQ(first_kind("Q B V D A D B . Q F V G A", "G F ."), "adjacent constituents");
    EXPECT_EQ(first_kind("Q B C V D A C V . Q F G V H A", "G V ."), "answer constituent mismatch");
    EXPECT_EQ(first_kind("Q B V D A D G B . Q F V G A", "G G F ."), "symbol repetition");
    EXPECT_EQ(first_kind("Q B V D A D H B . Q F V H A", "H H F ."), "symbol repetition");
    EXPECT_EQ(first_kind("Q B V D A D W B . Q F V G W A", "G W F ."), "delimiter collision");
    EXPECT_EQ(first_kind("Q B V D A D X B . Q F V X A", "X X F ."), "symbol repetition");
    EXPECT_EQ(first_kind("Q B V D A D ! B . Q F V ! A", "! ! F ."), "symbol repetition");
    EXPECT_EQ(first_kind("Q B V D A D . Q F V A", "F ."), "delimiter mismatch");
    EXPECT_EQ(first_kind("Q B A B Q C A", "C ."), "structure");
    EXPECT_EQ(first_kind("Q B A B . Q C A", "C"), "structure");
}

TEST(Tgt, NinePromptsValidate) {
    auto recs = read_tsv(testutil::fixture("nine_prompts.tsv"));
    ASSERT_EQ(recs.size(), 9u);
    for (const auto& r : recs) {
        // the fixture's first column is a name
        PromptRecord rec{r.y, r.info, ""};
        EXPECT_TRUE(validate_record(rec).empty()) << rec.x;
        EXPECT_TRUE(oracle::record_ok(rec.x, rec.y)) << rec.x;
    }
}

TEST(Tgt, EvaluateScoring) {
    auto recs = read_tsv(testutil::fixture("eval_manual.tsv"));
    ASSERT_EQ(recs.size(), 10u);
    for (const auto& r : recs) EXPECT_TRUE(validate_record(r).empty()) << r.x;
    EXPECT_DOUBLE_EQ(evaluate([](const std::string&) { return std::string(); }, recs).accuracy, 0.0);
    int calls = 0;
    auto res = evaluate(
        [&](const std::string& x) -> std::string {
            int i = calls++;
            if (i == 3) throw std::runtime_error("boom");
            for (const auto& r : recs)
                if (r.x == x) return i < 7 ? "  " + r.y + " " : "nope";
            return "";
        },
        recs);
    EXPECT_EQ(res.total, 10);
    EXPECT_EQ(res.correct, 6);
    EXPECT_DOUBLE_EQ(res.accuracy, 0.6);
    ASSERT_EQ(res.failures.size(), 4u);
    EXPECT_EQ(res.failures[0].got, "error: boom");
    EXPECT_EQ(evaluate([](const std::string&) { return std::string(); }, recs, 3).total, 3);
    EXPECT_DOUBLE_EQ(evaluate([](const std::string&) { return std::string(); }, {}).accuracy, 0.0);
}

TEST(Tgt, TsvAndManifestRoundTrip) {
    auto dir = std::filesystem::temp_directory_path() / "tpf_tgt_test";
    std::filesystem::remove_all(dir);
    auto recs = generate_split(parse_task("1_shot_rlw"), parse_split("dev"), 12, 3);
    write_tsv(dir / "dev.tsv", recs);
    auto back = read_tsv(dir / "dev.tsv");
    ASSERT_EQ(back.size(), recs.size());
    for (size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(back[i].x, recs[i].x);
        EXPECT_EQ(back[i].y, recs[i].y);
        EXPECT_EQ(back[i].info, recs[i].info);
    }
    write_manifest(dir, parse_task("1_shot_rlw"), "dev", 12, 3);
    write_manifest(dir, parse_task("1_shot_rlw"), "test", 5, 3);
    auto m = nlohmann::json::parse(testutil::slurp(dir / "manifest.json"));
    EXPECT_EQ(m["splits"]["dev"]["count"], 12);
    EXPECT_EQ(m["splits"]["test"]["count"], 5);
    std::filesystem::remove_all(dir);
}

TEST(Tgt, ValidatorAgreesWithSegmentationOracle) {
    std::mt19937_64 rng(99);
    auto base = generate_split(parse_task("1_shot_rlw"), parse_split("test"), 500, 21);
    int rejected = 0;
    for (const auto& r : base) {
        ASSERT_TRUE(oracle::record_ok(r.x, r.y)) << r.x;
        auto m = testutil::mutate_record(r, rng);
        bool want = oracle::record_ok(m.x, m.y);
        EXPECT_EQ(validate_record(m).empty(), want) << m.x << " => " << m.y;
        rejected += !want;
    }
    EXPECT_GT(rejected, 250);
}
