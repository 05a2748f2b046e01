#pragma once

#include "digdeeper/corpus.hpp"
#include "digdeeper/embedding.hpp"
#include "digdeeper/json.hpp"
#include "digdeeper/llm.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace digdeeper {

enum class DraftStage { Initial, Final };

std::string_view to_string(DraftStage stage);

/// Position of a recommendation's keyword in an article. Offsets are bytes.
struct KeywordAnchor {
    std::string candidate_id;
    std::string keyword;
    std::size_t begin = 0;
    std::size_t end = 0;
    bool matched = false;

    bool operator==(const KeywordAnchor&) const = default;
};

struct ArticleDraft {
    std::string lesson_id;
    DraftStage stage = DraftStage::Initial;
    std::string text;
    std::vector<KeywordAnchor> anchors;
    std::string model_tag;
    std::vector<std::string> flags;
};

struct CandidateRanking {
    std::string source_lesson;
    std::vector<RankedCandidate> entries;
};

/// One candidate's three-criterion assessment. `overall` drives selection.
struct RerankJudgment {
    std::string candidate_id;
    std::vector<std::string> related_keywords;
    bool keyword_match = false;
    int relevance = 0;
    bool context_alignment = false;
    int overall = 0;
    bool failed = false;

    bool operator==(const RerankJudgment&) const = default;
};

/// A selected candidate before it is bound to corpus metadata and an anchor.
struct Selection {
    std::string candidate_id;
    std::string keyword;
    double cosine = 0.0;
    RerankJudgment judgment;
};

struct Recommendation {
    std::string candidate_id;
    std::string title;
    std::string url;
    KeywordAnchor anchor;
    RerankJudgment judgment;
};

enum class PipelineMode { Full, SkipStage1, SkipStage3 };

std::string_view to_string(PipelineMode mode);
std::optional<PipelineMode> mode_from_string(std::string_view s);

struct PipelineConfig {
    std::size_t pool_size = 100;
    std::size_t k = 4;
    std::size_t batch_size = 10;
    int max_reasks = 2;
    std::size_t min_article_words = 300;
    std::size_t max_article_words = 800;
    int length_reprompts = 2;
    double generation_temperature = 0.7;
    double judge_temperature = 0.0;
    int max_tokens = 2048;
    std::string model;
    std::optional<std::int64_t> seed;
};

/// Everything a pipeline run talks to.
struct Backends {
    ChatBackend& chat;
    EmbeddingProvider& embedder;
    const TemplateSet& templates;
    RetryPolicy retry;
    Sleeper sleep = thread_sleeper();
};

struct PipelineResult {
    std::string lesson_id;
    std::string title;
    PipelineMode mode = PipelineMode::Full;
    ArticleDraft initial;
    ArticleDraft final_draft;
    CandidateRanking pool;
    std::vector<RerankJudgment> judgments;
    std::vector<Recommendation> recommendations;
    std::vector<std::string> flags;
    std::vector<CallRecord> trace;
};

ArticleDraft generate_initial_article(const Lesson& lesson, ChatBackend& chat, const RolePrompt& prompt,
                                      const PipelineConfig& config, const CallContext& ctx);

CandidateRanking retrieve_candidates(std::string_view draft_text, const DenseIndex& index,
                                     EmbeddingProvider& provider, std::size_t pool_size,
                                     const std::string& source_lesson, const CallContext& ctx);

struct RerankOutcome {
    std::vector<RerankJudgment> judgments;  // candidate order
    std::vector<std::string> warnings;
};

/// Schema for a reranker reply over exactly `ids`.
Schema rerank_schema(const std::vector<std::string>& ids);

RerankOutcome rerank(const ArticleDraft& draft, const CandidateRanking& candidates, const Corpus& corpus,
                     ChatBackend& chat, const RolePrompt& prompt, const PipelineConfig& config,
                     const CallContext& ctx);

/// Non-failed judgments by overall desc, cosine desc, id asc; the first k, each anchored
/// on its first related keyword.
std::vector<Selection> select_recommendations(const std::vector<RerankJudgment>& judgments,
                                              const CandidateRanking& ranking, std::size_t k);

/// First case-insensitive whole-word occurrence of each selection's keyword.
std::vector<KeywordAnchor> anchor_keywords(std::string_view text, const std::vector<Selection>& selections);

std::vector<Recommendation> bind_recommendations(const std::vector<Selection>& selections,
                                                 const std::vector<KeywordAnchor>& anchors, const Corpus& corpus);

/// `heading` followed by one `- [title](url)` line per recommendation.
std::string link_block(std::string_view heading, const std::vector<Recommendation>& recommendations);

ArticleDraft generate_final_article(const ArticleDraft& draft, const std::vector<Recommendation>& recommendations,
                                    const std::string& lesson_title, ChatBackend& chat, const RolePrompt& prompt,
                                    const PipelineConfig& config, const CallContext& ctx);

PipelineResult run_pipeline(const Lesson& lesson, const Corpus& corpus, const DenseIndex& index,
                            Backends& backends, const PipelineConfig& config, PipelineMode mode);

Json result_to_json(const PipelineResult& result);
PipelineResult result_from_json(const Json& j);
std::string result_markdown(const PipelineResult& result);
/// Lesson id made safe for use as a file stem.
std::string file_stem(std::string_view lesson_id);
/// Writes `<stem>.json` and `<stem>.md` into `dir`.
void write_result(const PipelineResult& result, const std::string& dir);
/// Every `*.json` result in `dir`, sorted by lesson id.
std::vector<PipelineResult> load_results(const std::string& dir);

}  // namespace digdeeper
