#include "digdeeper/text.hpp"

#include "digdeeper/error.hpp"

#include <algorithm>
#include <clocale>
#include <cmath>
#include <cwctype>
#include <numeric>
#include <set>

#include <locale.h>

namespace digdeeper {

namespace {

// Decodes one UTF-8 sequence at `pos`, advancing it. Invalid bytes decode as U+FFFD.
char32_t decode_utf8(std::string_view s, std::size_t& pos) {
    auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    const unsigned char lead = byte(pos);
    if (lead < 0x80) {
        ++pos;
        return lead;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) {
        extra = 1;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        extra = 2;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        extra = 3;
        cp = lead & 0x07;
    } else {
        ++pos;
        return 0xFFFD;
    }
    for (int i = 1; i <= extra; ++i) {
        if (pos + i >= s.size() || (byte(pos + i) & 0xC0) != 0x80) {
            ++pos;
            return 0xFFFD;
        }
        cp = (cp << 6) | (byte(pos + i) & 0x3F);
    }
    pos += extra + 1;
    return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

locale_t utf8_locale() {
    static const locale_t loc = [] {
        locale_t l = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(0));
        if (l == static_cast<locale_t>(0)) l = newlocale(LC_CTYPE_MASK, "en_US.UTF-8", static_cast<locale_t>(0));
        return l;
    }();
    return loc;
}

bool is_alnum_cp(char32_t cp) {
    if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
    if (cp == 0xFFFD) return false;
    if (auto loc = utf8_locale(); loc != static_cast<locale_t>(0)) {
        return iswalnum_l(static_cast<wint_t>(cp), loc) != 0;
    }
    // No UTF-8 locale available: treat letter-bearing blocks as word characters.
    return (cp >= 0xC0 && cp != 0xD7 && cp != 0xF7) && !(cp >= 0x2000 && cp <= 0x2BFF) &&
           !(cp >= 0x3000 && cp <= 0x303F);
}

char32_t lower_cp(char32_t cp) {
    if (cp < 0x80) return static_cast<char32_t>(std::tolower(static_cast<int>(cp)));
    if (auto loc = utf8_locale(); loc != static_cast<locale_t>(0)) {
        return static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), loc));
    }
    if ((cp >= 0xC0 && cp <= 0xDE && cp != 0xD7)) return cp + 0x20;
    return cp;
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

TokenStream tokenize(std::string_view text) {
    TokenStream tokens;
    std::string current;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = decode_utf8(text, pos);
        if (is_alnum_cp(cp)) {
            encode_utf8(lower_cp(cp), current);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::size_t count_words(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (char c : text) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

std::string first_words(std::string_view text, std::size_t n) {
    std::string out;
    std::size_t taken = 0;
    std::size_t i = 0;
    while (i < text.size() && taken < n) {
        while (i < text.size() && is_space(text[i])) ++i;
        if (i >= text.size()) break;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (!out.empty()) out.push_back(' ');
        out.append(text.substr(start, i - start));
        ++taken;
    }
    return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void validate(const Bm25Params& params) {
    if (!(params.k1 >= 0.0) || !std::isfinite(params.k1)) {
        throw Error(ErrorCode::Config, "bm25 k1 must be a finite value >= 0");
    }
    if (!(params.b >= 0.0 && params.b <= 1.0)) {
        throw Error(ErrorCode::Config, "bm25 b must lie in [0, 1]");
    }
}

Bm25Index Bm25Index::build(const std::vector<std::pair<std::string, std::string>>& docs) {
    if (docs.empty()) throw Error(ErrorCode::Precondition, "bm25 index needs at least one document");
    Bm25Index index;
    std::size_t total = 0;
    for (const auto& [id, text] : docs) {
        if (!index.slot_by_id_.emplace(id, index.doc_ids_.size()).second) {
            throw DuplicateId(id);
        }
        const std::size_t slot = index.doc_ids_.size();
        index.doc_ids_.push_back(id);
        const auto tokens = tokenize(text);
        index.doc_lengths_.push_back(tokens.size());
        total += tokens.size();
        for (const auto& t : tokens) ++index.postings_[t][slot];
    }
    index.avg_doc_len_ = static_cast<double>(total) / static_cast<double>(docs.size());
    if (index.avg_doc_len_ <= 0.0) {
        throw Error(ErrorCode::Precondition, "bm25 index documents contain no tokens");
    }
    return index;
}

std::size_t Bm25Index::slot(std::string_view doc_id) const {
    auto it = slot_by_id_.find(std::string(doc_id));
    if (it == slot_by_id_.end()) {
        throw Error(ErrorCode::NotFound, "document not indexed: " + std::string(doc_id));
    }
    return it->second;
}

bool Bm25Index::contains(std::string_view doc_id) const {
    return slot_by_id_.count(std::string(doc_id)) != 0;
}

std::size_t Bm25Index::doc_length(std::string_view doc_id) const {
    return doc_lengths_[slot(doc_id)];
}

std::size_t Bm25Index::doc_freq(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    return it == postings_.end() ? 0 : it->second.size();
}

std::size_t Bm25Index::term_freq(std::string_view term, std::string_view doc_id) const {
    const std::size_t s = slot(doc_id);
    auto it = postings_.find(std::string(term));
    if (it == postings_.end()) return 0;
    auto jt = it->second.find(s);
    return jt == it->second.end() ? 0 : jt->second;
}

double bm25_score(const Bm25Index& index, const Bm25Params& params, const TokenStream& query,
                  std::string_view doc_id) {
    validate(params);
    const std::size_t doc_len = index.doc_length(doc_id);
    const double n_docs = static_cast<double>(index.doc_count());
    const double len_norm =
        1.0 - params.b + params.b * static_cast<double>(doc_len) / index.avg_doc_len();

    // Sorted distinct terms: summation order is fixed so repeated runs agree bit-for-bit.
    const std::set<std::string> distinct(query.begin(), query.end());
    double score = 0.0;
    for (const auto& term : distinct) {
        const auto tf = static_cast<double>(index.term_freq(term, doc_id));
        if (tf == 0.0) continue;
        const auto df = static_cast<double>(index.doc_freq(term));
        const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
        score += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * len_norm);
    }
    return score;
}

double bm25_relevance_metric(std::string_view article, std::string_view reference_id,
                             const Bm25Index& index, const Bm25Params& params, bool normalize) {
    if (!index.contains(reference_id)) {
        throw Error(ErrorCode::NotFound, "reference not indexed: " + std::string(reference_id));
    }
    auto tokens = tokenize(article);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    if (tokens.empty()) return 0.0;
    const double raw = bm25_score(index, params, tokens, reference_id);
    return normalize ? raw / static_cast<double>(tokens.size()) : raw;
}

}  // namespace digdeeper
