#pragma once

#include "digdeeper/corpus.hpp"
#include "digdeeper/embedding.hpp"
#include "digdeeper/json.hpp"
#include "digdeeper/llm.hpp"
#include "digdeeper/pipeline.hpp"
#include "digdeeper/text.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace digdeeper {

struct HitResult {
    int hit = 0;
    double recall = 0.0;
};

/// hit = 1 iff any gold lesson was recommended; recall = |rec ∩ gold| / |gold|.
/// Gold must be nonempty.
HitResult hit_rate(const std::set<std::string>& recommended, const std::set<std::string>& gold);

struct BertScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Greedy cosine matching between token vectors; no idf weighting, no baseline rescaling.
/// Precision and recall are clamped to [0, 1] before the harmonic mean.
BertScore bert_score_vectors(const std::vector<EmbeddingVector>& candidate,
                             const std::vector<EmbeddingVector>& reference);

/// nullopt when the provider has no token-level capability.
std::optional<BertScore> bert_score(std::string_view candidate, std::string_view reference,
                                    EmbeddingProvider& token_provider);

struct CoherenceOptions {
    int samples = 1;
    int max_reasks = 2;
    double temperature = 0.0;
    std::string model;
    std::optional<std::int64_t> seed;
};

/// Mean of `samples` judge scores in [1, 10]; nullopt when no sample validated.
std::optional<double> coherence_score(std::string_view article, ChatBackend& chat, const RolePrompt& prompt,
                                      const CoherenceOptions& options, const CallContext& ctx);

enum class ReferenceField { Summary, Transcript, DigDeeperText };

std::string_view to_string(ReferenceField f);
std::optional<ReferenceField> reference_field_from_string(std::string_view s);

struct EvalConfig {
    ReferenceField reference_field = ReferenceField::Summary;
    bool normalize_bm25 = true;
    Bm25Params bm25;
    CoherenceOptions coherence;
    bool judge_coherence = true;
    bool table3 = false;
    CategoryThresholds thresholds;
    std::size_t k = 4;
    std::size_t parallelism = 4;
};

/// Metrics of one text against its lesson's reference.
struct TextMetrics {
    std::optional<double> bert_f1;
    std::optional<double> bm25;
    std::optional<double> cosine;
    std::optional<double> coherence;
};

struct LessonEval {
    std::string lesson_id;
    std::optional<int> hit;         // absent when the lesson has no gold links
    std::optional<double> recall_at_k;
    TextMetrics generated;
    std::optional<DigDeeperCategory> category;
    std::optional<TextMetrics> existing;  // the lesson's own Dig Deeper text (filled when table3 is set)
    std::vector<std::string> errors;
};

struct Aggregates {
    std::optional<double> hit_rate;
    std::optional<double> bert_score;
    std::optional<double> bm25;
    std::optional<double> cosine;
    std::optional<double> coherence;
    std::optional<double> recall_at_k;
    std::size_t hit_rate_lessons = 0;
};

struct CategoryRow {
    DigDeeperCategory category;
    std::size_t lessons = 0;
    Aggregates generated;
    Aggregates existing;
};

struct EvalReport {
    std::vector<LessonEval> per_lesson;  // lesson id order
    Aggregates aggregates;
    std::vector<CategoryRow> categories;  // only when table3 is set
    std::size_t coherence_failures = 0;
    Json config_snapshot;
};

Aggregates aggregate(const std::vector<LessonEval>& rows);

EvalReport evaluate_run(const std::vector<PipelineResult>& results, const Corpus& corpus, Backends& backends,
                        const EvalConfig& config);

Json report_to_json(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);
/// Writes `<stem>.json` and `<stem>.csv`.
void write_report(const EvalReport& report, const std::string& dir, const std::string& stem = "eval_report");

}  // namespace digdeeper
