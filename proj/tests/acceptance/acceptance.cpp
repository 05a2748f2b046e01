// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "digdeeper/cli.hpp"
#include "digdeeper/corpus.hpp"
#include "digdeeper/embedding.hpp"
#include "digdeeper/error.hpp"
#include "digdeeper/eval.hpp"
#include "digdeeper/markup.hpp"
#include "digdeeper/pipeline.hpp"
#include "digdeeper/text.hpp"

#include "report_oracle.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace digdeeper;
namespace fs = std::filesystem;

namespace {

/// Thrown by `require` with a description of the first violated check.
struct Failure {
    std::string what;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure{what};
}

CallContext quiet_ctx(CallTrace* trace = nullptr) { return CallContext{RetryPolicy{}, dd_test::no_sleep(), trace}; }

// ---------------------------------------------------------------------------
// Shared fixture state

struct Fixture {
    Corpus corpus;
    DenseIndex index{2, "none"};
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture out;
        MockChatBackend chat;
        HashEmbeddingProvider embedder;
        out.corpus = summarize_corpus(dd_test::fixture_corpus(), chat, TemplateSet::defaults(), {}, quiet_ctx()).corpus;
        out.index = build_index(out.corpus, embedder, SourceField::Summary, quiet_ctx()).index;
        return out;
    }();
    return f;
}

std::vector<PipelineResult> run_all(PipelineMode mode, MockOptions options = {}) {
    MockChatBackend chat(options);
    HashEmbeddingProvider embedder;
    const auto templates = TemplateSet::defaults();
    Backends b{chat, embedder, templates, RetryPolicy{}, dd_test::no_sleep()};
    std::vector<PipelineResult> out;
    for (const auto& lesson : fixture().corpus.lessons()) {
        out.push_back(run_pipeline(lesson, fixture().corpus, fixture().index, b, PipelineConfig{}, mode));
    }
    return out;
}

// ---------------------------------------------------------------------------
// 1. BM25

double brute_bm25(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& query,
                  std::size_t doc, double k1, double b) {
    double total = 0;
    for (const auto& d : docs) total += static_cast<double>(d.size());
    const double n = static_cast<double>(docs.size());
    const double avgdl = total / n;
    double score = 0;
    for (const auto& t : std::set<std::string>(query.begin(), query.end())) {
        double df = 0;
        for (const auto& d : docs) df += std::count(d.begin(), d.end(), t) > 0 ? 1 : 0;
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        const double tf = static_cast<double>(std::count(docs[doc].begin(), docs[doc].end(), t));
        score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * static_cast<double>(docs[doc].size()) / avgdl));
    }
    return score;
}

void bm25_oracle() {
    std::mt19937 rng(20240917);
    const std::vector<std::string> vocab = {"ant", "bee", "cow", "doe", "elk", "fox", "gnu", "hen"};
    double worst = 0;
    for (int round = 0; round < 200; ++round) {
        const std::size_t n_docs = 1 + rng() % 10;
        const std::size_t v = 1 + rng() % vocab.size();
        std::vector<std::vector<std::string>> docs(n_docs);
        std::vector<std::pair<std::string, std::string>> input;
        for (std::size_t d = 0; d < n_docs; ++d) {
            const std::size_t len = 1 + rng() % 20;
            std::string text;
            for (std::size_t i = 0; i < len; ++i) {
                docs[d].push_back(vocab[rng() % v]);
                text += docs[d].back() + " ";
            }
            input.emplace_back("d" + std::to_string(d), text);
        }
        const auto index = Bm25Index::build(input);
        std::vector<std::string> query;
        for (std::size_t i = 0, q = 1 + rng() % 6; i < q; ++i) query.push_back(vocab[rng() % vocab.size()]);
        for (std::size_t d = 0; d < n_docs; ++d) {
            const double got = bm25_score(index, {}, query, "d" + std::to_string(d));
            worst = std::max(worst, std::fabs(got - brute_bm25(docs, query, d, 1.2, 0.75)));
        }
    }
    require(worst <= 1e-9, "max deviation from brute force " + std::to_string(worst));

    const auto fx = Bm25Index::build({{"D1", "cat sat mat"}, {"D2", "dog sat log"}, {"D3", "cat cat dog"}});
    require(std::fabs(bm25_score(fx, {}, {"cat"}, "D3") - 0.6463) <= 1e-4, "fixture D3");
    require(std::fabs(bm25_score(fx, {}, {"cat"}, "D1") - 0.4700) <= 1e-4, "fixture D1");
}

// ---------------------------------------------------------------------------
// 2. Dense retrieval

void dense_oracle() {
    std::mt19937 rng(99);
    for (int round = 0; round < 100; ++round) {
        DenseIndex index(8, "oracle");
        const std::size_t n = 1 + rng() % 50;
        // small integer coordinates make exact score ties common
        auto random_vector = [&] {
            std::vector<float> v(8, 0.0f);
            while (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) {
                for (auto& x : v) x = static_cast<float>(static_cast<int>(rng() % 5) - 2);
            }
            return EmbeddingVector(v);
        };
        for (std::size_t i = 0; i < n; ++i) index.add("e" + std::to_string(rng() % 1000) + "_" + std::to_string(i), random_vector());
        const auto query = random_vector().normalized();
        std::vector<RankedCandidate> all;
        // scores come from cosine(); the oracle checks selection and ordering
        for (std::size_t i = 0; i < n; ++i) all.push_back({index.ids()[i], cosine(query, index.vectors()[i])});
        std::sort(all.begin(), all.end(), [](const RankedCandidate& x, const RankedCandidate& y) {
            return x.score != y.score ? x.score > y.score : x.id < y.id;
        });
        const std::size_t k = 1 + rng() % (n + 3);
        const auto got = top_k(index, query, k);
        const std::vector<RankedCandidate> want(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(k, n)));
        require(got.size() == want.size(), "round " + std::to_string(round) + " size");
        for (std::size_t i = 0; i < got.size(); ++i) {
            require(got[i].id == want[i].id, "round " + std::to_string(round) + " order at " + std::to_string(i));
            require(got[i].score == want[i].score, "round " + std::to_string(round) + " score at " + std::to_string(i));
        }
    }
}

// ---------------------------------------------------------------------------
// 3. Metric identities

void metric_identities() {
    std::mt19937 rng(5);
    std::normal_distribution<float> nd;
    for (int i = 0; i < 50; ++i) {
        std::vector<float> v(32);
        for (auto& x : v) x = nd(rng);
        require(std::fabs(cosine(EmbeddingVector(v), EmbeddingVector(v)) - 1.0) <= 1e-6, "cosine(v,v)");
    }
    HashEmbeddingProvider p;
    std::size_t texts = 0;
    for (const auto& lesson : dd_test::fixture_corpus().lessons()) {
        if (texts == 10) break;
        const auto s = bert_score(lesson.transcript, lesson.transcript, p);
        require(s.has_value(), "token embeddings unavailable");
        require(std::fabs(s->f1 - 1.0) <= 1e-6, "bert(x,x) on " + lesson.id);
        ++texts;
    }
    require(texts == 10, "fewer than 10 fixture texts");
    const auto h = hit_rate({"B", "C"}, {"A", "B"});
    require(h.hit == 1 && h.recall == 0.5, "hit_rate({B,C},{A,B})");
    const auto b = bert_score_vectors({EmbeddingVector({1, 0}), EmbeddingVector({0, 1})}, {EmbeddingVector({1, 0})});
    require(std::fabs(b.precision - 0.5) <= 1e-9, "bert precision");
    require(std::fabs(b.recall - 1.0) <= 1e-9, "bert recall");
    require(std::fabs(b.f1 - 2.0 / 3.0) <= 1e-9, "bert f1");
}

// ---------------------------------------------------------------------------
// 4. End-to-end determinism

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        files[fs::relative(e.path(), root).generic_string()] = ss.str();
    }
    return files;
}

double run_cli_timed(const dd_test::TempDir& dir) {
    const auto start = std::chrono::steady_clock::now();
    std::ostringstream out, err;
    const int code = run_cli({"run", "--mock", "--mode", "full", "--corpus", dd_test::fixture_path("lessons.jsonl"),
                              "--build-index", "--out", dir.str()},
                             out, err);
    require(code == 0, "run exited " + std::to_string(code) + ": " + err.str());
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void determinism() {
    dd_test::TempDir a, b;
    const double ta = run_cli_timed(a);
    const double tb = run_cli_timed(b);
    require(ta < 10.0 && tb < 10.0, "run took " + std::to_string(std::max(ta, tb)) + " s");
    const auto ra = read_tree(a.path());
    const auto rb = read_tree(b.path());
    require(ra.size() == 40, "expected 40 output files, got " + std::to_string(ra.size()));
    require(ra == rb, "output trees differ");
}

// ---------------------------------------------------------------------------
// 5. Containment

void containment() {
    const PipelineConfig cfg;
    for (auto mode : {PipelineMode::Full, PipelineMode::SkipStage1, PipelineMode::SkipStage3}) {
        for (const auto& r : run_all(mode)) {
            const std::string where = std::string(to_string(mode)) + "/" + r.lesson_id;
            std::set<std::string> pool;
            for (const auto& e : r.pool.entries) {
                require(e.id != r.lesson_id, where + ": source lesson in pool");
                require(fixture().corpus.contains(e.id), where + ": pool entry outside corpus");
                pool.insert(e.id);
            }
            require(r.recommendations.size() <= cfg.k, where + ": more than k recommendations");
            for (const auto& rec : r.recommendations) {
                require(pool.count(rec.candidate_id) == 1, where + ": recommendation outside pool");
            }
            for (const auto& a : r.final_draft.anchors) {
                if (!a.matched) continue;
                require(a.begin <= a.end && a.end <= r.final_draft.text.size(), where + ": anchor out of range");
                require(iequals(std::string_view(r.final_draft.text).substr(a.begin, a.end - a.begin), a.keyword),
                        where + ": anchor does not slice to '" + a.keyword + "'");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 6. Ablation contract

void ablation() {
    const auto templates = TemplateSet::defaults();
    for (auto mode : {PipelineMode::Full, PipelineMode::SkipStage1, PipelineMode::SkipStage3}) {
        const auto results = run_all(mode);
        for (const auto& r : results) {
            if (mode == PipelineMode::SkipStage1) {
                for (const auto& t : r.trace) require(t.role != "stage1_generator", r.lesson_id + ": stage-1 call traced");
            }
            if (mode == PipelineMode::SkipStage3) {
                require(r.final_draft.text == r.initial.text + "\n\n" + link_block("Related lessons:", r.recommendations),
                        r.lesson_id + ": skip-stage3 output is not draft + link block");
            }
        }
        MockChatBackend chat;
        HashEmbeddingProvider embedder;
        Backends b{chat, embedder, templates, RetryPolicy{}, dd_test::no_sleep()};
        const auto report = evaluate_run(results, fixture().corpus, b, EvalConfig{});
        const std::string m(to_string(mode));
        require(report.per_lesson.size() == 20, m + ": report rows");
        const auto& a = report.aggregates;
        require(a.hit_rate && a.bert_score && a.bm25 && a.cosine && a.coherence, m + ": missing aggregate");
        const auto problem = dd_test::check_report(report_to_json(report));
        require(problem.empty(), m + ": " + problem);
    }
}

// ---------------------------------------------------------------------------
// 7. Index roundtrip

void index_roundtrip() {
    const auto& original = fixture().index;
    dd_test::TempDir dir;
    save_index(original, dir.file("i.ddix"));
    const auto loaded = load_index(dir.file("i.ddix"));
    require(loaded.ids() == original.ids(), "ids differ");
    require(loaded.dim() == original.dim() && loaded.provider_tag() == original.provider_tag(), "header differs");
    for (std::size_t i = 0; i < original.size(); ++i) {
        const auto a = original.vectors()[i].values();
        const auto b = loaded.vectors()[i].values();
        require(a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0,
                "payload differs for " + original.ids()[i]);
    }
    auto bytes = serialize_index(original);
    bytes[0] = 'X';
    try {
        deserialize_index(bytes);
        require(false, "corrupted magic accepted");
    } catch (const Error& e) {
        require(e.code() == ErrorCode::Format, "corrupted magic raised " + std::string(to_string(e.code())));
    }
}

// ---------------------------------------------------------------------------
// 8. Category classifier

void classifier() {
    std::ifstream in(dd_test::fixture_path("categories.jsonl"));
    require(static_cast<bool>(in), "categories fixture missing");
    std::string line;
    int total = 0, correct = 0;
    std::map<std::string, int> per_category;
    while (std::getline(in, line)) {
        const auto j = Json::parse(line);
        const auto want = j.at("category").get<std::string>();
        ++per_category[want];
        ++total;
        if (to_string(classify_dig_deeper(j.at("text").get<std::string>())) == want) ++correct;
    }
    require(total == 9 && per_category.size() == 3, "fixture is not 3 x 3");
    for (const auto& [c, n] : per_category) require(n == 3, c + " has " + std::to_string(n) + " examples");
    require(correct == 9, std::to_string(correct) + "/9 correct");
}

// ---------------------------------------------------------------------------
// 9. Structured-output robustness

void structured_output() {
    MockChatBackend flaky(MockOptions{MockFault::MalformedFirstAttempt, MockFault::MalformedFirstAttempt});
    ChatRequest judge;
    judge.role = "coherence_judge";
    judge.user = "Rate this.";
    judge.attributes["article"] = "One paragraph of text.";
    const auto verdict = complete_structured(flaky, judge, Schema::integer(1, 10), 2, quiet_ctx());
    require(verdict.parse_attempts == 2, "judge parse_attempts " + std::to_string(verdict.parse_attempts));

    CallTrace trace;
    ArticleDraft draft;
    draft.lesson_id = "L01";
    draft.text = *fixture().corpus.at("L01").summary;
    CandidateRanking pool{"L01", {{"L02", 0.9}, {"L03", 0.8}, {"L06", 0.1}}};
    const auto outcome = rerank(draft, pool, fixture().corpus, flaky, TemplateSet::defaults().get(PromptRole::Reranker),
                                PipelineConfig{}, quiet_ctx(&trace));
    require(trace.count_role("reranker") == 2, "reranker calls " + std::to_string(trace.count_role("reranker")));
    require(outcome.judgments.size() == 3, "judgment count");
    for (const auto& j : outcome.judgments) {
        require(!j.failed && j.overall >= 0 && j.overall <= 10, "invalid judgment for " + j.candidate_id + " (failed=" + std::to_string(j.failed) + ", overall=" + std::to_string(j.overall) + ")");
    }

    const auto broken = run_all(PipelineMode::Full, MockOptions{MockFault::AlwaysMalformed, MockFault::None});
    require(broken.size() == 20, "always-malformed run incomplete");
    for (const auto& r : broken) {
        require(!r.judgments.empty(), r.lesson_id + ": no judgments");
        for (const auto& j : r.judgments) require(j.failed, r.lesson_id + ": judgment not marked failed");
        require(r.recommendations.empty(), r.lesson_id + ": recommendations from failed judgments");
        require(!r.final_draft.text.empty(), r.lesson_id + ": empty final article");
    }
}

// ---------------------------------------------------------------------------
// 10. Report self-consistency

void report_consistency() {
    const auto results = run_all(PipelineMode::Full);
    MockChatBackend chat;
    HashEmbeddingProvider embedder;
    const auto templates = TemplateSet::defaults();
    Backends b{chat, embedder, templates, RetryPolicy{}, dd_test::no_sleep()};
    EvalConfig cfg;
    cfg.table3 = true;
    const auto report = evaluate_run(results, fixture().corpus, b, cfg);
    dd_test::TempDir dir;
    write_report(report, dir.str());
    std::ifstream in(dir.file("eval_report.json"));
    const auto persisted = Json::parse(in);
    const auto problem = dd_test::check_report(persisted, 1e-9);
    require(problem.empty(), "mismatch in " + problem);

    std::size_t gold = 0;
    for (const auto& row : persisted["per_lesson"]) {
        const bool has_gold = !fixture().corpus.at(row["lesson_id"].get<std::string>()).gold_links.empty();
        require(row["hit"].is_null() != has_gold, row["lesson_id"].get<std::string>() + ": hit presence");
        gold += has_gold ? 1 : 0;
    }
    require(gold == 15 && persisted["supplementary"]["hit_rate_lessons"] == gold, "hit-rate denominator");
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<void()> check;
        double limit_s;  // 0 when the criterion states no runtime bound
    };
    const std::vector<Criterion> criteria = {
        {"bm25 matches brute-force oracle and hand fixture", bm25_oracle, 5.0},
        {"dense top_k matches full-sort prefix with ties", dense_oracle, 5.0},
        {"metric identities", metric_identities, 0},
        {"end-to-end mock run is byte-identical across runs", determinism, 0},
        {"pipeline containment invariants", containment, 0},
        {"ablation contract", ablation, 0},
        {"index roundtrip is bit-exact, bad magic rejected", index_roundtrip, 0},
        {"category classifier 9/9", classifier, 0},
        {"structured-output robustness", structured_output, 0},
        {"report aggregates recompute from persisted rows", report_consistency, 0},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        std::string detail;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.check();
        } catch (const Failure& f) {
            detail = f.what;
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (detail.empty() && c.limit_s > 0 && secs >= c.limit_s) {
            detail = "took " + std::to_string(secs) + " s, limit " + std::to_string(c.limit_s) + " s";
        }
        const bool ok = detail.empty();
        failed += ok ? 0 : 1;
        std::cout << (ok ? "PASS" : "FAIL") << "  [" << (i + 1) << "] " << c.name << " (" << static_cast<long>(secs * 1000)
                  << " ms)";
        if (!ok) std::cout << ": " << detail;
        std::cout << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
