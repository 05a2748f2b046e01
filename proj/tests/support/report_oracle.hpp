#pragma once

#include "digdeeper/json.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace dd_test {

/// Mean of the non-null `key` values across `rows`, or nullopt if none.
inline std::optional<double> column_mean(const std::vector<digdeeper::Json>& rows, const std::string& key) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
        if (!r.contains(key) || r[key].is_null()) continue;
        sum += r[key].get<double>();
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

inline bool close(const std::optional<double>& expected, const digdeeper::Json& actual, double tol) {
    if (!expected) return actual.is_null();
    return actual.is_number() && std::fabs(actual.get<double>() - *expected) <= tol;
}

/// Recomputes every aggregate of a persisted report from its per-lesson rows, including
/// category rows. Returns the first mismatch, or an empty string.
inline std::string check_report(const digdeeper::Json& report, double tol = 1e-9) {
    const std::vector<digdeeper::Json> rows(report.at("per_lesson").begin(), report.at("per_lesson").end());
    const auto& agg = report.at("aggregates");
    for (const char* key : {"hit", "bert_score", "bm25", "cosine", "coherence"}) {
        const std::string out = std::string(key) == "hit" ? "hit_rate" : key;
        if (!close(column_mean(rows, key), agg.at(out), tol)) return "aggregate " + out;
    }
    if (!close(column_mean(rows, "recall_at_k"), report.at("supplementary").at("recall_at_k"), tol)) {
        return "recall_at_k";
    }
    std::size_t with_gold = 0;
    for (const auto& r : rows) with_gold += r["hit"].is_null() ? 0 : 1;
    if (report.at("supplementary").at("hit_rate_lessons").get<std::size_t>() != with_gold) return "hit_rate_lessons";

    if (!report.contains("categories")) return {};
    for (const auto& cat : report["categories"]) {
        const auto name = cat.at("category").get<std::string>();
        std::vector<digdeeper::Json> mine, existing;
        for (const auto& r : rows) {
            if (r["category"] != name) continue;
            mine.push_back(r);
            if (r.contains("existing_dig_deeper")) existing.push_back(r["existing_dig_deeper"]);
        }
        if (cat.at("lessons").get<std::size_t>() != mine.size()) return name + " lessons";
        for (const char* key : {"hit", "bert_score", "bm25", "cosine", "coherence"}) {
            const std::string out = std::string(key) == "hit" ? "hit_rate" : key;
            if (!close(column_mean(mine, key), cat.at("generated").at(out), tol)) return name + " generated " + out;
        }
        for (const char* key : {"bert_score", "bm25", "cosine", "coherence"}) {
            if (!close(column_mean(existing, key), cat.at("existing_dig_deeper").at(key), tol)) {
                return name + " existing " + key;
            }
        }
    }
    return {};
}

}  // namespace dd_test
