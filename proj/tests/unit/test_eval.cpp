#include "digdeeper/error.hpp"
#include "digdeeper/eval.hpp"

#include "report_oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <fstream>
#include <sstream>

using namespace digdeeper;

namespace {

EmbeddingVector vec(std::vector<float> v) { return EmbeddingVector(std::move(v)); }

CallContext quiet_ctx() { return CallContext{RetryPolicy{}, dd_test::no_sleep(), nullptr}; }

/// Pipeline results for every fixture lesson, produced once with the mock backends.
struct FixtureRun {
    Corpus corpus;
    DenseIndex index{2, "none"};
    std::vector<PipelineResult> results;
};

const FixtureRun& fixture_run() {
    static const FixtureRun run = [] {
        FixtureRun r;
        MockChatBackend chat;
        HashEmbeddingProvider embedder;
        const auto templates = TemplateSet::defaults();
        r.corpus = summarize_corpus(dd_test::fixture_corpus(), chat, templates, {}, quiet_ctx()).corpus;
        r.index = build_index(r.corpus, embedder, SourceField::Summary, quiet_ctx()).index;
        Backends b{chat, embedder, templates, RetryPolicy{}, dd_test::no_sleep()};
        for (const auto& lesson : r.corpus.lessons()) {
            r.results.push_back(run_pipeline(lesson, r.corpus, r.index, b, PipelineConfig{}, PipelineMode::Full));
        }
        return r;
    }();
    return run;
}

EvalReport evaluate_fixture(bool table3) {
    MockChatBackend chat;
    HashEmbeddingProvider embedder;
    const auto templates = TemplateSet::defaults();
    Backends b{chat, embedder, templates, RetryPolicy{}, dd_test::no_sleep()};
    EvalConfig cfg;
    cfg.table3 = table3;
    return evaluate_run(fixture_run().results, fixture_run().corpus, b, cfg);
}

}  // namespace

TEST(HitRate, SpecExample) {
    const auto h = hit_rate({"B", "C"}, {"A", "B"});
    EXPECT_EQ(h.hit, 1);
    EXPECT_DOUBLE_EQ(h.recall, 0.5);
    const auto miss = hit_rate({"C"}, {"A", "B"});
    EXPECT_EQ(miss.hit, 0);
    EXPECT_DOUBLE_EQ(miss.recall, 0.0);
    EXPECT_EQ(hit_rate({}, {"A"}).hit, 0);
    EXPECT_THROW(hit_rate({"A"}, {}), Error);
}

TEST(BertScore, HandFixture) {
    // candidate tokens e1, e2 against reference e1: precision (1 + 0) / 2, recall 1
    const auto s = bert_score_vectors({vec({1, 0}), vec({0, 1})}, {vec({1, 0})});
    EXPECT_NEAR(s.precision, 0.5, 1e-9);
    EXPECT_NEAR(s.recall, 1.0, 1e-9);
    EXPECT_NEAR(s.f1, 2.0 / 3.0, 1e-9);
}

TEST(BertScore, ClampsNegativeSimilarity) {
    const auto s = bert_score_vectors({vec({-1, 0})}, {vec({1, 0})});
    EXPECT_EQ(s.precision, 0.0);
    EXPECT_EQ(s.recall, 0.0);
    EXPECT_EQ(s.f1, 0.0);
    EXPECT_THROW(bert_score_vectors({}, {vec({1, 0})}), Error);
}

TEST(BertScore, SelfScoreIsOneOnFixtureTexts) {
    HashEmbeddingProvider p;
    std::size_t checked = 0;
    for (const auto& lesson : dd_test::fixture_corpus().lessons()) {
        if (checked == 10) break;
        const auto s = bert_score(lesson.transcript, lesson.transcript, p);
        ASSERT_TRUE(s);
        EXPECT_NEAR(s->f1, 1.0, 1e-6) << lesson.id;
        ++checked;
    }
    EXPECT_EQ(checked, 10u);
}

TEST(BertScore, ProviderWithoutTokensGivesNothing) {
    struct Plain final : EmbeddingProvider {
        std::size_t dim() const override { return 2; }
        std::string tag() const override { return "plain"; }
        std::vector<std::vector<float>> embed_raw(const std::vector<std::string>& t) override {
            return std::vector<std::vector<float>>(t.size(), {1.0f, 0.0f});
        }
    } plain;
    EXPECT_FALSE(bert_score("a b", "a", plain));
}

TEST(Coherence, MeanOfSamples) {
    dd_test::ScriptedChat chat([](const ChatRequest&, int call) {
        return std::to_string(call % 2 == 0 ? 6 : 9);
    });
    CoherenceOptions opts;
    opts.samples = 4;
    const auto s = coherence_score("Some article.", chat, TemplateSet::defaults().get(PromptRole::CoherenceJudge),
                                   opts, quiet_ctx());
    ASSERT_TRUE(s);
    EXPECT_DOUBLE_EQ(*s, 7.5);
}

TEST(Coherence, OutOfRangeScoresAreRejected) {
    dd_test::ScriptedChat chat([](const ChatRequest&, int) { return "11"; });
    CoherenceOptions opts;
    opts.max_reasks = 1;
    EXPECT_FALSE(coherence_score("x", chat, TemplateSet::defaults().get(PromptRole::CoherenceJudge), opts,
                                 quiet_ctx()));
    EXPECT_EQ(chat.requests().size(), 2u);
}

TEST(Aggregate, ExcludesLessonsWithoutGold) {
    std::vector<LessonEval> rows(3);
    rows[0].lesson_id = "a";
    rows[0].hit = 1;
    rows[0].recall_at_k = 0.5;
    rows[0].generated.cosine = 0.2;
    rows[1].lesson_id = "b";
    rows[1].hit = 0;
    rows[1].recall_at_k = 0.0;
    rows[1].generated.cosine = 0.4;
    rows[2].lesson_id = "c";
    rows[2].generated.cosine = 0.9;
    const auto a = aggregate(rows);
    EXPECT_DOUBLE_EQ(*a.hit_rate, 0.5);
    EXPECT_DOUBLE_EQ(*a.recall_at_k, 0.25);
    EXPECT_EQ(a.hit_rate_lessons, 2u);
    EXPECT_NEAR(*a.cosine, 0.5, 1e-12);
    EXPECT_FALSE(a.bert_score);
}

TEST(Aggregate, NoGoldAtAllLeavesHitRateEmpty) {
    std::vector<LessonEval> rows(1);
    rows[0].lesson_id = "a";
    EXPECT_FALSE(aggregate(rows).hit_rate);
}

TEST(EvaluateRun, FixtureReport) {
    const auto report = evaluate_fixture(false);
    ASSERT_EQ(report.per_lesson.size(), 20u);
    EXPECT_EQ(report.aggregates.hit_rate_lessons, 15u);
    for (const auto& row : report.per_lesson) {
        const bool has_gold = !fixture_run().corpus.at(row.lesson_id).gold_links.empty();
        EXPECT_EQ(row.hit.has_value(), has_gold) << row.lesson_id;
        ASSERT_TRUE(row.generated.bert_f1 && row.generated.bm25 && row.generated.cosine && row.generated.coherence);
        EXPECT_GE(*row.generated.bm25, 0.0);
        EXPECT_LE(*row.generated.bm25, 1.0);
        EXPECT_GE(*row.generated.coherence, 1.0);
        EXPECT_LE(*row.generated.coherence, 10.0);
        EXPECT_TRUE(row.errors.empty());
    }
    EXPECT_TRUE(report.categories.empty());
    EXPECT_EQ(dd_test::check_report(report_to_json(report)), "");
}

TEST(EvaluateRun, Table3Rows) {
    const auto report = evaluate_fixture(true);
    ASSERT_EQ(report.categories.size(), 3u);
    for (const auto& c : report.categories) EXPECT_EQ(c.lessons, 5u);
    const auto j = report_to_json(report);
    EXPECT_EQ(j["categories"][0]["category"], "only_links");
    EXPECT_FALSE(j["categories"][0]["existing_dig_deeper"].contains("hit_rate"));
    EXPECT_EQ(dd_test::check_report(j), "");
}

TEST(EvaluateRun, UnknownLessonIsRejected) {
    auto results = fixture_run().results;
    results[0].lesson_id = "nope";
    MockChatBackend chat;
    HashEmbeddingProvider embedder;
    const auto templates = TemplateSet::defaults();
    Backends b{chat, embedder, templates, RetryPolicy{}, dd_test::no_sleep()};
    EXPECT_THROW(evaluate_run(results, fixture_run().corpus, b, EvalConfig{}), Error);
}

TEST(Report, OracleCatchesTampering) {
    auto j = report_to_json(evaluate_fixture(false));
    j["aggregates"]["cosine"] = j["aggregates"]["cosine"].get<double>() + 1e-6;
    EXPECT_EQ(dd_test::check_report(j), "aggregate cosine");
}

TEST(Report, FilesAndCsv) {
    const auto report = evaluate_fixture(false);
    dd_test::TempDir dir;
    write_report(report, dir.str());
    std::ifstream js(dir.file("eval_report.json"));
    const auto j = Json::parse(js);
    EXPECT_EQ(j, report_to_json(report));
    for (const char* key : {"hit_rate", "bert_score", "bm25", "cosine", "coherence"}) {
        EXPECT_TRUE(j["aggregates"].contains(key)) << key;
    }
    EXPECT_TRUE(j["config_snapshot"].contains("reference_field"));

    std::ifstream csv(dir.file("eval_report.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "lesson_id,hit,recall_at_k,bert_score,bm25,cosine,coherence,category");
    std::size_t n = 0;
    while (std::getline(csv, line)) ++n;
    EXPECT_EQ(n, 20u);
}

TEST(ReferenceField, Names) {
    for (auto f : {ReferenceField::Summary, ReferenceField::Transcript, ReferenceField::DigDeeperText}) {
        EXPECT_EQ(reference_field_from_string(to_string(f)), f);
    }
    EXPECT_FALSE(reference_field_from_string("title"));
}

TEST(HitRate, HitIsCeilingOfRecallAndIgnoresOrderAndDuplicates) {
    std::mt19937 rng(8);
    for (int round = 0; round < 200; ++round) {
        std::vector<std::string> recommended;
        std::set<std::string> gold;
        for (int i = 0, n = static_cast<int>(rng() % 6); i < n; ++i) recommended.push_back(std::string(1, 'a' + rng() % 8));
        for (int i = 0, n = 1 + static_cast<int>(rng() % 4); i < n; ++i) gold.insert(std::string(1, 'a' + rng() % 8));
        const auto h = hit_rate({recommended.begin(), recommended.end()}, gold);
        EXPECT_EQ(h.hit, static_cast<int>(std::ceil(h.recall)));
        auto shuffled = recommended;
        shuffled.insert(shuffled.end(), recommended.begin(), recommended.end());
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto again = hit_rate({shuffled.begin(), shuffled.end()}, gold);
        EXPECT_EQ(again.hit, h.hit);
        EXPECT_EQ(again.recall, h.recall);
    }
}

TEST(EvaluateRun, Deterministic) {
    EXPECT_EQ(report_to_json(evaluate_fixture(true)).dump(), report_to_json(evaluate_fixture(true)).dump());
}
