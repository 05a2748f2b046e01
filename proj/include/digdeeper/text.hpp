#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace digdeeper {

/// Lowercase word tokens. Splits on every non-alphanumeric code point.
using TokenStream = std::vector<std::string>;

TokenStream tokenize(std::string_view text);

/// Whitespace-delimited word count (the unit used for length budgets).
std::size_t count_words(std::string_view text);

/// First `n` whitespace-delimited words joined by single spaces.
std::string first_words(std::string_view text, std::size_t n);

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

void validate(const Bm25Params& params);

/// Term statistics over a fixed document collection.
class Bm25Index {
public:
    /// Documents are (id, text) pairs; ids must be unique and at least one document given.
    static Bm25Index build(const std::vector<std::pair<std::string, std::string>>& docs);

    std::size_t doc_count() const noexcept { return doc_ids_.size(); }
    double avg_doc_len() const noexcept { return avg_doc_len_; }
    bool contains(std::string_view doc_id) const;
    std::size_t doc_length(std::string_view doc_id) const;
    std::size_t doc_freq(std::string_view term) const;
    std::size_t term_freq(std::string_view term, std::string_view doc_id) const;
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }

private:
    std::size_t slot(std::string_view doc_id) const;

    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::size_t> slot_by_id_;
    std::vector<std::size_t> doc_lengths_;
    double avg_doc_len_ = 0.0;
    // term -> (doc slot -> count); ordered inner map keeps iteration deterministic
    std::unordered_map<std::string, std::map<std::size_t, std::size_t>> postings_;
};

/// Okapi BM25 over the distinct terms of `query`, with IDF ln((N-n+0.5)/(n+0.5)+1).
double bm25_score(const Bm25Index& index, const Bm25Params& params, const TokenStream& query,
                  std::string_view doc_id);

/// BM25 of the article's distinct tokens against an indexed reference document.
/// When `normalize` is set the score is divided by the number of distinct query terms.
double bm25_relevance_metric(std::string_view article, std::string_view reference_id,
                             const Bm25Index& index, const Bm25Params& params,
                             bool normalize = true);

}  // namespace digdeeper
