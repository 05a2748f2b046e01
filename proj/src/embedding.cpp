#include "digdeeper/embedding.hpp"

#include "digdeeper/concurrency.hpp"
#include "digdeeper/error.hpp"
#include "digdeeper/text.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace digdeeper {

EmbeddingVector::EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {}

double EmbeddingVector::norm() const {
    double sum = 0.0;
    for (float v : values_) sum += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(sum);
}

EmbeddingVector EmbeddingVector::normalized() const {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw Error(ErrorCode::Precondition, "cannot normalize a zero or non-finite vector");
    }
    std::vector<float> out(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(values_[i]) / n);
    }
    return EmbeddingVector(std::move(out));
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "cosine of vectors with dims " + std::to_string(a.dim()) +
                                                      " and " + std::to_string(b.dim()));
    }
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::Precondition, "cosine of a zero vector");
    const auto av = a.values();
    const auto bv = b.values();
    double dot = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) dot += static_cast<double>(av[i]) * static_cast<double>(bv[i]);
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

std::optional<std::vector<std::vector<float>>> EmbeddingProvider::embed_tokens(std::string_view) {
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Hash provider

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dim) : dim_(dim) {
    if (dim_ < 2) throw Error(ErrorCode::Config, "embedding dim must be >= 2");
}

std::vector<std::vector<float>> HashEmbeddingProvider::embed_raw(const std::vector<std::string>& texts) {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<float> v(dim_, 0.0f);
        const auto tokens = tokenize(text);
        const bool any_long = std::any_of(tokens.begin(), tokens.end(), [](const auto& t) { return t.size() >= 3; });
        for (const auto& t : tokens) {
            if (any_long && t.size() < 3) continue;
            v[fnv1a(t) % dim_] += 1.0f;
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::optional<std::vector<std::vector<float>>> HashEmbeddingProvider::embed_tokens(std::string_view text) {
    const auto tokens = tokenize(text);
    std::vector<std::vector<float>> out;
    out.reserve(tokens.size());
    auto add = [&](std::vector<float>& v, const std::string& token, float w) {
        const auto h = fnv1a(token);
        v[h % dim_] += w;
        v[(h >> 32) % dim_] += 0.5f * w;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::vector<float> v(dim_, 0.0f);
        add(v, tokens[i], 1.0f);
        if (i > 0) add(v, tokens[i - 1], 0.25f);
        if (i + 1 < tokens.size()) add(v, tokens[i + 1], 0.25f);
        out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// HTTP provider

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingSettings settings, std::shared_ptr<HttpTransport> transport)
    : settings_(std::move(settings)), transport_(std::move(transport)) {
    if (settings_.url.empty()) throw Error(ErrorCode::Config, "embedding backend url is empty");
    if (settings_.dim < 2) throw Error(ErrorCode::Config, "embedding backend must declare dim >= 2");
    if (!transport_) throw Error(ErrorCode::Config, "embedding backend has no transport");
}

std::vector<std::vector<float>> HttpEmbeddingProvider::embed_raw(const std::vector<std::string>& texts) {
    Json body;
    body["model"] = settings_.model;
    body["input"] = texts;
    HttpHeaders headers{{"Accept", "application/json"}};
    if (auto key = read_env(settings_.api_key_env); !key.empty()) {
        headers.emplace_back("Authorization", "Bearer " + key);
    }
    const auto response = transport_->post(settings_.url, headers, body.dump());
    raise_for_status(response, "embedding backend");
    const Json parsed = Json::parse(response.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("data") || !parsed["data"].is_array()) {
        throw Error(ErrorCode::Backend, "embedding backend response lacks a data array");
    }
    if (parsed["data"].size() != texts.size()) {
        throw Error(ErrorCode::Backend, "embedding backend returned " + std::to_string(parsed["data"].size()) +
                                            " vectors for " + std::to_string(texts.size()) + " inputs");
    }
    std::vector<std::vector<float>> out;
    for (const auto& item : parsed["data"]) {
        if (!item.contains("embedding") || !item["embedding"].is_array()) {
            throw Error(ErrorCode::Backend, "embedding backend item lacks an embedding array");
        }
        std::vector<float> v;
        for (const auto& x : item["embedding"]) {
            if (!x.is_number()) throw Error(ErrorCode::Backend, "embedding contains a non-number");
            v.push_back(x.get<float>());
        }
        if (v.size() != settings_.dim) {
            throw Error(ErrorCode::DimensionMismatch, "embedding backend returned dim " + std::to_string(v.size()) +
                                                          ", expected " + std::to_string(settings_.dim));
        }
        out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<EmbeddingVector> embed_batch(EmbeddingProvider& provider, const std::vector<std::string>& texts,
                                         const CallContext& ctx) {
    for (const auto& t : texts) {
        if (t.empty()) throw Error(ErrorCode::Precondition, "cannot embed empty text");
    }
    if (texts.empty()) return {};
    std::vector<std::vector<float>> raw;
    CallRecord rec;
    rec.role = "embed";
    rec.model = provider.tag();
    rec.prompt_hash = fnv1a("");
    for (const auto& t : texts) rec.prompt_hash = fnv1a(t, rec.prompt_hash);
    try {
        rec.attempts = run_with_retry(
            ctx.retry, ctx.sleep,
            [&] {
                ConcurrencyLimiter::Permit permit(backend_limiter());
                raw = provider.embed_raw(texts);
            },
            &rec.backoff);
    } catch (const Error& e) {
        rec.attempts = static_cast<int>(rec.backoff.size()) + 1;
        rec.error = std::string(to_string(e.code()));
        if (ctx.trace) ctx.trace->record(rec);
        throw;
    }
    rec.ok = true;
    if (ctx.trace) ctx.trace->record(rec);
    if (raw.size() != texts.size()) throw Error(ErrorCode::Backend, "embedding provider returned wrong vector count");
    std::vector<EmbeddingVector> out;
    out.reserve(raw.size());
    for (auto& v : raw) {
        if (v.size() != provider.dim()) {
            throw Error(ErrorCode::DimensionMismatch, "provider returned dim " + std::to_string(v.size()) +
                                                          ", declared " + std::to_string(provider.dim()));
        }
        out.push_back(EmbeddingVector(std::move(v)).normalized());
    }
    return out;
}

EmbeddingVector embed(EmbeddingProvider& provider, std::string_view text, const CallContext& ctx) {
    return std::move(embed_batch(provider, {std::string(text)}, ctx).front());
}

// ---------------------------------------------------------------------------
// Dense index

DenseIndex::DenseIndex(std::size_t dim, std::string provider_tag) : dim_(dim), provider_tag_(std::move(provider_tag)) {
    if (dim_ < 2) throw Error(ErrorCode::Precondition, "index dim must be >= 2");
    if (provider_tag_.empty()) throw Error(ErrorCode::Precondition, "index provider tag must be nonempty");
}

bool DenseIndex::contains(std::string_view id) const {
    return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
}

const EmbeddingVector& DenseIndex::at(std::string_view id) const {
    auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) throw Error(ErrorCode::NotFound, "id not in index: " + std::string(id));
    return vectors_[static_cast<std::size_t>(it - ids_.begin())];
}

void DenseIndex::add(std::string id, const EmbeddingVector& vector) {
    if (vector.dim() != dim_) {
        throw Error(ErrorCode::DimensionMismatch, "vector dim " + std::to_string(vector.dim()) +
                                                      " does not match index dim " + std::to_string(dim_));
    }
    if (contains(id)) throw DuplicateId(id);
    const double n = vector.norm();
    // vectors already within the unit-norm tolerance are stored untouched
    vectors_.push_back(std::abs(n - 1.0) <= 1e-4 ? vector : vector.normalized());
    ids_.push_back(std::move(id));
}

std::string_view to_string(SourceField f) { return f == SourceField::Summary ? "summary" : "transcript"; }

IndexBuildReport build_index(const Corpus& corpus, EmbeddingProvider& provider, SourceField source,
                             const CallContext& ctx, std::size_t batch_size) {
    std::vector<std::string> texts;
    texts.reserve(corpus.lesson_count());
    for (const auto& lesson : corpus.lessons()) {
        if (source == SourceField::Summary) {
            if (!lesson.summary || lesson.summary->empty()) {
                throw Error(ErrorCode::Precondition, "lesson " + lesson.id + " has no summary; run summarize first");
            }
            texts.push_back(*lesson.summary);
        } else {
            texts.push_back(lesson.transcript);
        }
    }
    IndexBuildReport report{DenseIndex(provider.dim(), provider.tag()), {}};
    batch_size = std::max<std::size_t>(1, batch_size);
    const auto& lessons = corpus.lessons();
    for (std::size_t start = 0; start < texts.size(); start += batch_size) {
        const std::size_t end = std::min(texts.size(), start + batch_size);
        std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                       texts.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<EmbeddingVector> vectors;
        try {
            vectors = embed_batch(provider, chunk, ctx);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::DimensionMismatch) throw;
            // retry the chunk one lesson at a time so a single bad input cannot sink its neighbors
            for (std::size_t i = start; i < end; ++i) {
                try {
                    report.index.add(lessons[i].id, embed(provider, texts[i], ctx));
                } catch (const Error& inner) {
                    if (inner.code() == ErrorCode::DimensionMismatch) throw;
                    report.warnings.push_back("lesson " + lessons[i].id + " omitted from index: " + inner.what());
                }
            }
            continue;
        }
        for (std::size_t i = start; i < end; ++i) report.index.add(lessons[i].id, vectors[i - start]);
    }
    return report;
}

std::vector<RankedCandidate> top_k(const DenseIndex& index, const EmbeddingVector& query, std::size_t k,
                                   const std::set<std::string>& exclude) {
    if (k < 1) throw Error(ErrorCode::Precondition, "top_k needs k >= 1");
    if (query.dim() != index.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "query dim " + std::to_string(query.dim()) +
                                                      " does not match index dim " + std::to_string(index.dim()));
    }
    std::vector<RankedCandidate> scored;
    scored.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (exclude.count(index.ids()[i])) continue;
        scored.push_back({index.ids()[i], cosine(query, index.vectors()[i])});
    }
    const auto better = [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    };
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
    scored.resize(n);
    return scored;
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

constexpr char kMagic[4] = {'D', 'D', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T le() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return v;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw Error(ErrorCode::Format, "index file truncated");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_index(const DenseIndex& index) {
    std::string out(kMagic, 4);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.dim()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.size()));
    const auto& tag = index.provider_tag();
    if (tag.size() > 0xFFFF) throw Error(ErrorCode::Format, "provider tag too long for index format");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(tag.size()));
    out += tag;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto& id = index.ids()[i];
        if (id.size() > 0xFFFF) throw Error(ErrorCode::Format, "lesson id too long for index format");
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
        out += id;
        for (float f : index.vectors()[i].values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

DenseIndex deserialize_index(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(4) != std::string_view(kMagic, 4)) throw Error(ErrorCode::Format, "not a dense index file (bad magic)");
    const auto version = r.le<std::uint32_t>();
    if (version != kVersion) {
        throw Error(ErrorCode::Format, "unsupported dense index version " + std::to_string(version));
    }
    const auto dim = r.le<std::uint32_t>();
    const auto count = r.le<std::uint32_t>();
    const auto tag_len = r.le<std::uint16_t>();
    DenseIndex index(dim, std::string(r.take(tag_len)));
    for (std::uint32_t e = 0; e < count; ++e) {
        const auto id_len = r.le<std::uint16_t>();
        std::string id(r.take(id_len));
        std::vector<float> values(dim);
        for (auto& v : values) v = std::bit_cast<float>(r.le<std::uint32_t>());
        EmbeddingVector vec(std::move(values));
        if (!std::isfinite(vec.norm()) || std::abs(vec.norm() - 1.0) > 1e-4) {
            throw Error(ErrorCode::Format, "index entry " + id + " is not unit length");
        }
        index.add(std::move(id), vec);
    }
    if (!r.done()) throw Error(ErrorCode::Format, "trailing bytes after dense index payload");
    return index;
}

void save_index(const DenseIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write index file: " + path);
    const auto bytes = serialize_index(index);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "failed writing index file: " + path);
}

DenseIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read index file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_index(buf.str());
}

}  // namespace digdeeper
