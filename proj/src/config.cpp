#include "digdeeper/config.hpp"

#include "digdeeper/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <variant>
#include <vector>

namespace digdeeper {

namespace {

using Slot = std::variant<std::string Config::*, std::int64_t Config::*, double Config::*, bool Config::*,
                          std::optional<std::int64_t> Config::*>;

struct Field {
    const char* key;
    Slot slot;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> all = {
        {"corpus_path", &Config::corpus_path},
        {"index_path", &Config::index_path},
        {"output_dir", &Config::output_dir},
        {"template_dir", &Config::template_dir},
        {"chat_backend", &Config::chat_backend},
        {"chat_url", &Config::chat_url},
        {"chat_model", &Config::chat_model},
        {"chat_api_key_env", &Config::chat_api_key_env},
        {"embedding_backend", &Config::embedding_backend},
        {"embedding_url", &Config::embedding_url},
        {"embedding_model", &Config::embedding_model},
        {"embedding_api_key_env", &Config::embedding_api_key_env},
        {"embedding_dim", &Config::embedding_dim},
        {"http_timeout_ms", &Config::http_timeout_ms},
        {"max_retries", &Config::max_retries},
        {"retry_initial_ms", &Config::retry_initial_ms},
        {"retry_max_ms", &Config::retry_max_ms},
        {"target_words", &Config::target_words},
        {"pool_size", &Config::pool_size},
        {"k", &Config::k},
        {"batch_size", &Config::batch_size},
        {"max_reasks", &Config::max_reasks},
        {"parallelism", &Config::parallelism},
        {"min_article_words", &Config::min_article_words},
        {"max_article_words", &Config::max_article_words},
        {"generation_temperature", &Config::generation_temperature},
        {"judge_temperature", &Config::judge_temperature},
        {"max_tokens", &Config::max_tokens},
        {"seed", &Config::seed},
        {"embedding_source", &Config::embedding_source},
        {"reference_field", &Config::reference_field},
        {"normalize_bm25", &Config::normalize_bm25},
        {"bm25_k1", &Config::bm25_k1},
        {"bm25_b", &Config::bm25_b},
        {"samples", &Config::samples},
        {"judge_coherence", &Config::judge_coherence},
        {"category_min_prose_words", &Config::category_min_prose_words},
        {"category_max_links_mainly_text", &Config::category_max_links_mainly_text},
    };
    return all;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
    throw Error(ErrorCode::Config, "config key '" + key + "': " + why);
}

void assign(Config& c, const Field& f, const Json& v) {
    const std::string key = f.key;
    std::visit(
        [&](auto member) {
            using T = std::remove_reference_t<decltype(c.*member)>;
            if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) bad(key, "expected a string");
                c.*member = v.get<std::string>();
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                if (!v.is_number_integer()) bad(key, "expected an integer");
                c.*member = v.get<std::int64_t>();
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) bad(key, "expected a number");
                c.*member = v.get<double>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) bad(key, "expected true or false");
                c.*member = v.get<bool>();
            } else {
                if (v.is_null()) {
                    c.*member = std::nullopt;
                } else {
                    if (!v.is_number_integer()) bad(key, "expected an integer or null");
                    c.*member = v.get<std::int64_t>();
                }
            }
        },
        f.slot);
}

// Environment strings are typed by the field they override.
Json from_env_string(const Field& f, const std::string& raw) {
    const std::string key = f.key;
    return std::visit(
        [&](auto member) -> Json {
            using T = std::remove_reference_t<decltype(std::declval<Config&>().*member)>;
            if constexpr (std::is_same_v<T, std::string>) {
                return raw;
            } else if constexpr (std::is_same_v<T, bool>) {
                std::string s = raw;
                std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
                if (s == "1" || s == "true" || s == "yes") return true;
                if (s == "0" || s == "false" || s == "no") return false;
                bad(key, "environment value '" + raw + "' is not a boolean");
            } else {
                if (std::is_same_v<T, std::optional<std::int64_t>> && (raw.empty() || raw == "null")) return nullptr;
                Json parsed = Json::parse(raw, nullptr, false);
                if (parsed.is_discarded() || !parsed.is_number()) bad(key, "environment value '" + raw + "' is not a number");
                return parsed;
            }
        },
        f.slot);
}

std::string env_name(const char* key) {
    std::string name = "DD_";
    for (const char* p = key; *p; ++p) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(*p))));
    return name;
}

}  // namespace

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        return v ? std::optional<std::string>(v) : std::nullopt;
    };
}

Config config_from_json(const Json& object, const EnvLookup& env) {
    if (!object.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
    Config c;
    for (auto it = object.begin(); it != object.end(); ++it) {
        auto f = std::find_if(fields().begin(), fields().end(), [&](const Field& x) { return it.key() == x.key; });
        if (f == fields().end()) throw Error(ErrorCode::Config, "unknown config key '" + it.key() + "'");
        assign(c, *f, it.value());
    }
    if (env) {
        for (const auto& f : fields()) {
            if (auto raw = env(env_name(f.key))) assign(c, f, from_env_string(f, *raw));
        }
    }
    c.validate();
    return c;
}

Config load_config(const std::string& path, const EnvLookup& env) {
    if (path.empty()) return config_from_json(Json::object(), env);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read config file: " + path);
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Config, "config file is not valid JSON: " + path);
    return config_from_json(j, env);
}

void Config::validate() const {
    auto range = [](const char* key, auto v, auto lo, auto hi) {
        if (v < lo || v > hi) {
            bad(key, "value " + Json(v).dump() + " outside [" + Json(lo).dump() + ", " + Json(hi).dump() + "]");
        }
    };
    auto one_of = [](const char* key, const std::string& v, std::initializer_list<const char*> options) {
        for (const char* o : options) {
            if (v == o) return;
        }
        bad(key, "unsupported value '" + v + "'");
    };
    one_of("chat_backend", chat_backend, {"mock", "http"});
    one_of("embedding_backend", embedding_backend, {"mock", "http"});
    one_of("embedding_source", embedding_source, {"summary", "transcript"});
    one_of("reference_field", reference_field, {"summary", "transcript", "dig_deeper_text"});
    if (chat_backend == "http" && chat_url.empty()) bad("chat_url", "required when chat_backend is http");
    if (embedding_backend == "http" && embedding_url.empty()) {
        bad("embedding_url", "required when embedding_backend is http");
    }
    range("embedding_dim", embedding_dim, 2, 65536);
    range("http_timeout_ms", http_timeout_ms, 1, 3600000);
    range("max_retries", max_retries, 1, 20);
    range("retry_initial_ms", retry_initial_ms, 0, 600000);
    range("retry_max_ms", retry_max_ms, retry_initial_ms, 3600000);
    range("target_words", target_words, 30, 5000);
    range("pool_size", pool_size, 1, 100000);
    range("k", k, 1, 1000);
    range("batch_size", batch_size, 1, 1000);
    range("max_reasks", max_reasks, 0, 10);
    range("parallelism", parallelism, 1, 256);
    range("min_article_words", min_article_words, 1, 100000);
    range("max_article_words", max_article_words, min_article_words, 100000);
    range("generation_temperature", generation_temperature, 0.0, 2.0);
    range("judge_temperature", judge_temperature, 0.0, 2.0);
    range("max_tokens", max_tokens, 1, 1000000);
    range("bm25_k1", bm25_k1, 0.0, 100.0);
    range("bm25_b", bm25_b, 0.0, 1.0);
    range("samples", samples, 1, 100);
    range("category_min_prose_words", category_min_prose_words, 0, 100000);
    range("category_max_links_mainly_text", category_max_links_mainly_text, 0, 100000);
}

Json Config::to_json() const {
    Json j;
    for (const auto& f : fields()) {
        std::visit(
            [&](auto member) {
                using T = std::remove_cvref_t<decltype(this->*member)>;
                if constexpr (std::is_same_v<T, std::optional<std::int64_t>>) {
                    j[f.key] = (this->*member) ? Json(*(this->*member)) : Json(nullptr);
                } else {
                    j[f.key] = this->*member;
                }
            },
            f.slot);
    }
    return j;
}

PipelineConfig Config::pipeline() const {
    PipelineConfig p;
    p.pool_size = static_cast<std::size_t>(pool_size);
    p.k = static_cast<std::size_t>(k);
    p.batch_size = static_cast<std::size_t>(batch_size);
    p.max_reasks = static_cast<int>(max_reasks);
    p.min_article_words = static_cast<std::size_t>(min_article_words);
    p.max_article_words = static_cast<std::size_t>(max_article_words);
    p.generation_temperature = generation_temperature;
    p.judge_temperature = judge_temperature;
    p.max_tokens = static_cast<int>(max_tokens);
    p.model = chat_model;
    p.seed = seed;
    return p;
}

EvalConfig Config::eval(bool table3) const {
    EvalConfig e;
    e.reference_field = *reference_field_from_string(reference_field);
    e.normalize_bm25 = normalize_bm25;
    e.bm25 = Bm25Params{bm25_k1, bm25_b};
    e.coherence.samples = static_cast<int>(samples);
    e.coherence.max_reasks = static_cast<int>(max_reasks);
    e.coherence.temperature = judge_temperature;
    e.coherence.model = chat_model;
    e.coherence.seed = seed;
    e.judge_coherence = judge_coherence;
    e.table3 = table3;
    e.thresholds = thresholds();
    e.k = static_cast<std::size_t>(k);
    e.parallelism = static_cast<std::size_t>(parallelism);
    return e;
}

SummarizeOptions Config::summarize() const {
    SummarizeOptions s;
    s.target_words = static_cast<std::size_t>(target_words);
    s.parallelism = static_cast<std::size_t>(parallelism);
    s.model = chat_model;
    s.temperature = generation_temperature;
    s.max_tokens = static_cast<int>(max_tokens);
    s.max_reprompts = 2;
    return s;
}

RetryPolicy Config::retry() const {
    RetryPolicy r;
    r.max_attempts = static_cast<int>(max_retries);
    r.initial_delay = std::chrono::milliseconds(retry_initial_ms);
    r.max_delay = std::chrono::milliseconds(retry_max_ms);
    return r;
}

SourceField Config::source_field() const {
    return embedding_source == "transcript" ? SourceField::Transcript : SourceField::Summary;
}

CategoryThresholds Config::thresholds() const {
    return CategoryThresholds{static_cast<std::size_t>(category_min_prose_words),
                              static_cast<std::size_t>(category_max_links_mainly_text)};
}

std::unique_ptr<ChatBackend> make_chat_backend(const Config& config) {
    if (config.chat_backend == "mock") return std::make_unique<MockChatBackend>();
    HttpChatSettings s;
    s.url = config.chat_url;
    s.model = config.chat_model;
    s.api_key_env = config.chat_api_key_env;
    s.timeout = std::chrono::milliseconds(config.http_timeout_ms);
    return std::make_unique<HttpChatBackend>(s, make_http_transport(s.timeout));
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const Config& config) {
    if (config.embedding_backend == "mock") {
        return std::make_unique<HashEmbeddingProvider>(static_cast<std::size_t>(config.embedding_dim));
    }
    HttpEmbeddingSettings s;
    s.url = config.embedding_url;
    s.model = config.embedding_model;
    s.api_key_env = config.embedding_api_key_env;
    s.dim = static_cast<std::size_t>(config.embedding_dim);
    s.timeout = std::chrono::milliseconds(config.http_timeout_ms);
    return std::make_unique<HttpEmbeddingProvider>(s, make_http_transport(s.timeout));
}

}  // namespace digdeeper
