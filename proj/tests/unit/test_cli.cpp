#include "digdeeper/cli.hpp"
#include "digdeeper/json.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace digdeeper;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string fixture() { return dd_test::fixture_path("lessons.jsonl"); }

/// First JSON object on stderr.
Json first_error(const std::string& err) { return Json::parse(err.substr(0, err.find('\n'))); }

std::size_t count_ext(const std::filesystem::path& dir, const std::string& ext) {
    std::size_t n = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) n += e.path().extension() == ext ? 1 : 0;
    return n;
}

}  // namespace

TEST(Cli, IngestValidCorpus) {
    dd_test::TempDir dir;
    const auto r = cli({"ingest", "--corpus", fixture(), "--out", dir.file("c.jsonl"), "--strict"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir.file("c.jsonl")));
}

TEST(Cli, IngestDuplicateIdIsDomainError) {
    dd_test::TempDir dir;
    std::ofstream(dir.file("dup.jsonl")) << R"({"id":"a","title":"A","url":"u","transcript":"t"})" "\n"
                                         << R"({"id":"a","title":"B","url":"v","transcript":"s"})" "\n";
    const auto r = cli({"ingest", "--corpus", dir.file("dup.jsonl"), "--out", dir.file("o.jsonl")});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(first_error(r.err)["error"], "duplicate_id");
}

TEST(Cli, MissingInputIsIoError) {
    dd_test::TempDir dir;
    const auto r = cli({"ingest", "--corpus", dir.file("nope.jsonl")});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(first_error(r.err)["error"], "io");
}

TEST(Cli, BadConfigIsConfigError) {
    dd_test::TempDir dir;
    std::ofstream(dir.file("c.json")) << R"({"bogus": 1})";
    const auto r = cli({"ingest", "--config", dir.file("c.json"), "--corpus", fixture()});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(first_error(r.err)["error"], "config");
}

TEST(Cli, HelpExitsZeroEverywhere) {
    EXPECT_EQ(cli({"--help"}).code, 0);
    for (const char* sub : {"ingest", "summarize", "index", "run", "eval", "ablate", "classify"}) {
        const auto r = cli({sub, "--help"});
        EXPECT_EQ(r.code, 0) << sub;
        EXPECT_FALSE(r.out.empty()) << sub;
    }
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    const auto r = cli({"run", "--no-such-flag"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(first_error(r.err)["error"], "usage");
    EXPECT_EQ(cli({"run", "--mode", "skip-stage2", "--mock"}).code, 2);
}

TEST(Cli, RunWritesEveryLesson) {
    dd_test::TempDir dir;
    const auto r = cli({"run", "--mock", "--corpus", fixture(), "--build-index", "--out", dir.str()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_ext(dir.path(), ".json"), 20u);
    EXPECT_EQ(count_ext(dir.path(), ".md"), 20u);
}

TEST(Cli, RunUnknownLessonIsDomainError) {
    dd_test::TempDir dir;
    const auto r = cli({"run", "--mock", "--corpus", fixture(), "--build-index", "--out", dir.str(), "--lessons",
                        "L99"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(first_error(r.err)["error"], "not_found");
}

TEST(Cli, RunWithoutIndexIsConfigError) {
    dd_test::TempDir dir;
    const auto r = cli({"run", "--mock", "--corpus", fixture(), "--out", dir.str(), "--index", dir.file("x.ddix")});
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, IndexThenRunThenEval) {
    dd_test::TempDir dir;
    const auto index = dir.file("i.ddix");
    ASSERT_EQ(cli({"index", "--mock", "--corpus", fixture(), "--index", index}).code, 0);
    const auto out = dir.file("res");
    ASSERT_EQ(cli({"run", "--mock", "--corpus", fixture(), "--index", index, "--out", out, "--lessons", "L01,L02"})
                  .code,
              0);
    EXPECT_EQ(count_ext(out, ".json"), 2u);
    const auto e = cli({"eval", "--mock", "--corpus", fixture(), "--results", out, "--out", dir.file("ev")});
    EXPECT_EQ(e.code, 0) << e.err;
    std::ifstream in(dir.file("ev/eval_report.json"));
    const auto report = Json::parse(in);
    EXPECT_EQ(report["per_lesson"].size(), 2u);
    EXPECT_TRUE(report["config_snapshot"].contains("config"));
}

TEST(Cli, EvalOnEmptyDirectoryIsDomainError) {
    dd_test::TempDir dir;
    const auto r = cli({"eval", "--mock", "--corpus", fixture(), "--results", dir.str()});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(first_error(r.err)["error"], "precondition");
}

TEST(Cli, AblateWritesOneRowPerMode) {
    dd_test::TempDir dir;
    const auto r = cli({"ablate", "--mock", "--corpus", fixture(), "--build-index", "--out", dir.str()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(dir.file("ablation.json"));
    const auto j = Json::parse(in);
    ASSERT_EQ(j["modes"].size(), 3u);
    for (const char* mode : {"full", "skip-stage1", "skip-stage3"}) {
        EXPECT_TRUE(std::filesystem::exists(dir.path() / mode / "eval_report.json")) << mode;
    }
}

TEST(Cli, ClassifyCorpusAndFiles) {
    dd_test::TempDir dir;
    std::ofstream(dir.file("a.txt")) << "[x](https://x) [y](https://y)";
    const auto r = cli({"classify", "--corpus", fixture(), "--text", dir.file("a.txt")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string line, last;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        last = line;
        ++n;
    }
    EXPECT_EQ(n, 16u);  // 15 lessons with Dig Deeper text plus the file
    const auto j = Json::parse(last);
    EXPECT_EQ(j["category"], "only_links");
    EXPECT_EQ(j["link_count"], 2);
}

TEST(Cli, RerunOverwritesWithIdenticalBytes) {
    dd_test::TempDir dir;
    const auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::vector<std::string> args = {"run", "--mock", "--corpus", fixture(), "--build-index",
                                           "--out", dir.str(), "--lessons", "L04,L11"};
    ASSERT_EQ(cli(args).code, 0);
    const auto first = slurp(dir.file("L11.json")) + slurp(dir.file("L04.md"));
    ASSERT_EQ(cli(args).code, 0);
    EXPECT_EQ(slurp(dir.file("L11.json")) + slurp(dir.file("L04.md")), first);
    ASSERT_EQ(cli({"eval", "--mock", "--corpus", fixture(), "--results", dir.str()}).code, 0);
    const auto report = slurp(dir.file("eval_report.json"));
    ASSERT_EQ(cli({"eval", "--mock", "--corpus", fixture(), "--results", dir.str()}).code, 0);
    EXPECT_EQ(slurp(dir.file("eval_report.json")), report);
}

TEST(Cli, HelpListsEveryFlag) {
    const std::map<std::string, std::vector<std::string>> flags = {
        {"ingest", {"--config", "--corpus", "--out", "--strict"}},
        {"summarize", {"--config", "--corpus", "--out", "--force", "--mock"}},
        {"index", {"--config", "--corpus", "--index", "--source", "--mock"}},
        {"run", {"--config", "--corpus", "--out", "--index", "--mode", "--lessons", "--mock", "--build-index"}},
        {"eval", {"--config", "--corpus", "--out", "--results", "--table3", "--mock"}},
        {"ablate", {"--config", "--corpus", "--out", "--lessons", "--mock", "--build-index"}},
        {"classify", {"--config", "--corpus", "--text"}},
    };
    for (const auto& [sub, names] : flags) {
        const auto help = cli({sub, "--help"}).out;
        for (const auto& f : names) EXPECT_NE(help.find(f), std::string::npos) << sub << " " << f;
    }
}
