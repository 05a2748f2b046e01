#pragma once

#include "digdeeper/corpus.hpp"
#include "digdeeper/http.hpp"
#include "digdeeper/llm.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace digdeeper {

/// Fixed-length float32 vector. Vectors returned by embed() and stored in a DenseIndex
/// are L2-normalized.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<float> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    double norm() const;

    /// Unit-length copy. Throws Precondition on a zero or non-finite vector.
    EmbeddingVector normalized() const;

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<float> values_;
};

/// Dot product of the normalized inputs, clamped to [-1, 1].
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Text embedding backend. Implementations return raw vectors; embed() normalizes.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const = 0;
    virtual std::string tag() const = 0;
    /// One attempt per call; transient failures throw Error(ErrorCode::Transient).
    virtual std::vector<std::vector<float>> embed_raw(const std::vector<std::string>& texts) = 0;

    /// Contextual per-token vectors for token-level metrics. Providers without that
    /// capability return nullopt.
    virtual std::optional<std::vector<std::vector<float>>> embed_tokens(std::string_view text);
};

/// Token hashes folded into `dim` buckets. Deterministic and offline.
class HashEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(std::size_t dim = 256);

    std::size_t dim() const override { return dim_; }
    std::string tag() const override { return "hash-" + std::to_string(dim_); }
    std::vector<std::vector<float>> embed_raw(const std::vector<std::string>& texts) override;
    /// Each token's bucket vector mixed with quarter-weight neighbors, so identical tokens in
    /// different contexts get different vectors.
    std::optional<std::vector<std::vector<float>>> embed_tokens(std::string_view text) override;

private:
    std::size_t dim_;
};

struct HttpEmbeddingSettings {
    std::string url;
    std::string model;
    std::string api_key_env;
    std::size_t dim = 0;
    std::chrono::milliseconds timeout{60000};
};

/// `{"model", "input": [...]}` -> `{"data": [{"embedding": [...]}]}` over HTTP POST.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(HttpEmbeddingSettings settings, std::shared_ptr<HttpTransport> transport);

    std::size_t dim() const override { return settings_.dim; }
    std::string tag() const override { return "http:" + settings_.model; }
    std::vector<std::vector<float>> embed_raw(const std::vector<std::string>& texts) override;

private:
    HttpEmbeddingSettings settings_;
    std::shared_ptr<HttpTransport> transport_;
};

/// Embeds and normalizes one nonempty text, retrying transient failures per ctx.retry.
EmbeddingVector embed(EmbeddingProvider& provider, std::string_view text, const CallContext& ctx);

std::vector<EmbeddingVector> embed_batch(EmbeddingProvider& provider, const std::vector<std::string>& texts,
                                         const CallContext& ctx);

struct RankedCandidate {
    std::string id;
    double score = 0.0;
    bool operator==(const RankedCandidate&) const = default;
};

/// Lesson id -> normalized vector, insertion order preserved.
class DenseIndex {
public:
    DenseIndex(std::size_t dim, std::string provider_tag);

    std::size_t dim() const noexcept { return dim_; }
    const std::string& provider_tag() const noexcept { return provider_tag_; }
    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::vector<EmbeddingVector>& vectors() const noexcept { return vectors_; }
    bool contains(std::string_view id) const;
    const EmbeddingVector& at(std::string_view id) const;

    /// Appends, normalizing vectors whose norm is off by more than 1e-4.
    /// Throws DuplicateId or DimensionMismatch.
    void add(std::string id, const EmbeddingVector& vector);

    bool operator==(const DenseIndex& other) const = default;

private:
    std::size_t dim_;
    std::string provider_tag_;
    std::vector<std::string> ids_;
    std::vector<EmbeddingVector> vectors_;
};

enum class SourceField { Summary, Transcript };

std::string_view to_string(SourceField f);

struct IndexBuildReport {
    DenseIndex index;
    std::vector<std::string> warnings;
};

/// One entry per lesson from the chosen field. Lessons whose embedding fails are omitted
/// with a warning; a lesson missing the chosen field is a precondition error.
IndexBuildReport build_index(const Corpus& corpus, EmbeddingProvider& provider, SourceField source,
                             const CallContext& ctx, std::size_t batch_size = 32);

/// Exact full scan: the k highest-cosine entries outside `exclude`, sorted by score
/// descending then id ascending.
std::vector<RankedCandidate> top_k(const DenseIndex& index, const EmbeddingVector& query, std::size_t k,
                                   const std::set<std::string>& exclude = {});

// Binary format: "DDIX", u32 version=1, u32 dim, u32 count, u16 tag length + tag,
// then per entry u16 id length + id + dim float32. All integers and floats little-endian.
std::string serialize_index(const DenseIndex& index);
DenseIndex deserialize_index(std::string_view bytes);
void save_index(const DenseIndex& index, const std::string& path);
DenseIndex load_index(const std::string& path);

}  // namespace digdeeper
