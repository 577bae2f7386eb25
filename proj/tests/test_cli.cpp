#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "test_util.hpp"
#include "tpf/cli.hpp"
#include "tpf/turing.hpp"

using namespace tpf;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct Out {
    int code;
    std::string out, err;
};

Out cli(std::vector<std::string> args) {
    std::ostringstream o, e;
    int c = run_cli(args, o, e);
    return {c, o.str(), e.str()};
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("tpf_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void put(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(cli({}).code, kUsage);
    EXPECT_EQ(cli({"frobnicate"}).code, kUsage);
    EXPECT_EQ(cli({"run"}).code, kUsage);
    EXPECT_EQ(cli({"compile", "parse", "--emit", "onnx"}).code, kUsage);
    EXPECT_EQ(cli({"run", "--prompt", "Q a A a . Q b A", "--program", "no_such_thing"}).code, kUsage);
}

TEST(Cli, CompileAsset) {
    auto r = cli({"compile", "parse"});
    ASSERT_EQ(r.code, kOk) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["weights"].size(), 20u);
}

TEST(Cli, CompileErrorExitCode) {
    auto d = scratch("bad");
    put(d / "bad.psl", "registers { position: \"p\" }\nwhere nope[N] == 1:\n  position[N] = 2\n");
    auto r = cli({"compile", (d / "bad.psl").string()});
    EXPECT_EQ(r.code, kCompileError);
    EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Cli, CompileWeightsToFiles) {
    auto d = scratch("weights");
    auto r = cli({"compile", "parse", "--emit", "weights", "-o", (d / "parse").string()});
    ASSERT_EQ(r.code, kOk) << r.err;
    EXPECT_TRUE(fs::exists(d / "parse.bin"));
    EXPECT_TRUE(fs::exists(d / "parse.json"));
}

TEST(Cli, RunSwapWithOracleAndTrace) {
    auto d = scratch("run");
    auto r = cli({"run", "--prompt", "Q B V D E A D E V B . Q F G H V K L A", "--oracle", "--stats", "--trace",
                  (d / "t.json").string()});
    ASSERT_EQ(r.code, kOk) << r.err;
    EXPECT_EQ(r.out, "K L V F G H .\n");
    EXPECT_NE(r.err.find("agree"), std::string::npos);
    auto t = nlohmann::json::parse(slurp(d / "t.json"));
    EXPECT_EQ(t["columns"], 26);
}

TEST(Cli, MaxNewTruncates) {
    auto r = cli({"run", "--prompt", "Q B V D E A D E V B . Q F G H V K L A", "--max-new", "2"});
    ASSERT_EQ(r.code, kOk);
    EXPECT_EQ(r.out, "K L\n");
    EXPECT_NE(r.err.find("stopped"), std::string::npos);
}

TEST(Cli, DatasetRoundTrip) {
    auto d = scratch("data");
    auto g = cli({"gen-data", "--task", "1_shot_rlw", "--split", "test", "--count", "12", "--seed", "5", "--out",
                  d.string()});
    ASSERT_EQ(g.code, kOk) << g.err;
    fs::path file = d / "1_shot_rlw" / "test.tsv";
    ASSERT_TRUE(fs::exists(file));
    auto v = cli({"validate", "--split", file.string()});
    EXPECT_EQ(v.code, kOk);
    EXPECT_NE(v.out.find("12/12 records valid"), std::string::npos);
    auto e = cli({"eval", "--split", file.string()});
    ASSERT_EQ(e.code, kOk) << e.err;
    EXPECT_NE(e.out.find("accuracy 1.0000 (12/12)"), std::string::npos) << e.out;

    put(d / "broken.tsv", "Q a A a . Q b A\tc .\n");
    auto b = cli({"validate", "--split", (d / "broken.tsv").string()});
    EXPECT_EQ(b.code, kRuntimeError);
    EXPECT_NE(b.out.find("0/1 records valid"), std::string::npos) << b.out;
}

TEST(Cli, TuringRun) {
    auto d = scratch("tm");
    auto fx = nlohmann::json::parse(slurp(fixture("tm_example.json")));
    put(d / "t.json", fx["table"].dump());
    for (bool utm : {false, true}) {
        std::vector<std::string> a{"tm-run", "--table", (d / "t.json").string(), "--tape", "A B C", "--head", "1"};
        if (utm) a.push_back("--utm");
        auto r = cli(a);
        ASSERT_EQ(r.code, kOk) << r.err;
        EXPECT_NE(r.out.find("tape  A X C"), std::string::npos) << r.out;
        EXPECT_NE(r.out.find("head  2"), std::string::npos) << r.out;
        EXPECT_NE(r.out.find("state s1"), std::string::npos) << r.out;
    }
    auto p = cli({"tm-run", "--table", (d / "t.json").string(), "--print-psl"});
    ASSERT_EQ(p.code, kOk);
    EXPECT_NE(p.out.find("where"), std::string::npos);
    EXPECT_EQ(cli({"tm-run", "--table", (d / "t.json").string()}).code, kUsage);
}
