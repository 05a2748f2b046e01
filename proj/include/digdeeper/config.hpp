#pragma once

#include "digdeeper/corpus.hpp"
#include "digdeeper/embedding.hpp"
#include "digdeeper/eval.hpp"
#include "digdeeper/json.hpp"
#include "digdeeper/llm.hpp"
#include "digdeeper/pipeline.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace digdeeper {

/// Flat run configuration. JSON keys match the member names; every key can also be set
/// through the environment as DD_<KEY> (upper case), which wins over the file.
struct Config {
    std::string corpus_path;
    std::string index_path;
    std::string output_dir = "out";
    std::string template_dir;

    std::string chat_backend = "mock";  // mock | http
    std::string chat_url;
    std::string chat_model;
    std::string chat_api_key_env = "DD_CHAT_API_KEY";

    std::string embedding_backend = "mock";  // mock | http
    std::string embedding_url;
    std::string embedding_model;
    std::string embedding_api_key_env = "DD_EMBEDDING_API_KEY";
    std::int64_t embedding_dim = 256;

    std::int64_t http_timeout_ms = 60000;
    std::int64_t max_retries = 4;
    std::int64_t retry_initial_ms = 500;
    std::int64_t retry_max_ms = 8000;

    std::int64_t target_words = 150;
    std::int64_t pool_size = 100;
    std::int64_t k = 4;
    std::int64_t batch_size = 10;
    std::int64_t max_reasks = 2;
    std::int64_t parallelism = 4;
    std::int64_t min_article_words = 300;
    std::int64_t max_article_words = 800;
    double generation_temperature = 0.7;
    double judge_temperature = 0.0;
    std::int64_t max_tokens = 2048;
    std::optional<std::int64_t> seed;
    std::string embedding_source = "summary";  // summary | transcript

    std::string reference_field = "summary";  // summary | transcript | dig_deeper_text
    bool normalize_bm25 = true;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    std::int64_t samples = 1;
    bool judge_coherence = true;
    std::int64_t category_min_prose_words = 50;
    std::int64_t category_max_links_mainly_text = 2;

    /// Throws Error(Config) naming the first out-of-range knob.
    void validate() const;

    Json to_json() const;

    PipelineConfig pipeline() const;
    EvalConfig eval(bool table3) const;
    SummarizeOptions summarize() const;
    RetryPolicy retry() const;
    SourceField source_field() const;
    CategoryThresholds thresholds() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_env();

/// Defaults, then the JSON object (unknown keys rejected), then DD_<KEY> overrides.
Config config_from_json(const Json& object, const EnvLookup& env = process_env());
/// Empty path: defaults plus environment.
Config load_config(const std::string& path, const EnvLookup& env = process_env());

std::unique_ptr<ChatBackend> make_chat_backend(const Config& config);
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const Config& config);

}  // namespace digdeeper
