#include "digdeeper/eval.hpp"

#include "digdeeper/concurrency.hpp"
#include "digdeeper/error.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

namespace digdeeper {

HitResult hit_rate(const std::set<std::string>& recommended, const std::set<std::string>& gold) {
    if (gold.empty()) throw Error(ErrorCode::Precondition, "hit rate needs a nonempty gold set");
    std::size_t common = 0;
    for (const auto& g : gold) common += recommended.count(g);
    HitResult r;
    r.hit = common > 0 ? 1 : 0;
    r.recall = static_cast<double>(common) / static_cast<double>(gold.size());
    return r;
}

BertScore bert_score_vectors(const std::vector<EmbeddingVector>& candidate,
                             const std::vector<EmbeddingVector>& reference) {
    if (candidate.empty() || reference.empty()) {
        throw Error(ErrorCode::Precondition, "bert score needs at least one token on each side");
    }
    // best cosine for every token on either side, from one similarity pass
    std::vector<double> best_c(candidate.size(), -1.0);
    std::vector<double> best_r(reference.size(), -1.0);
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        for (std::size_t j = 0; j < reference.size(); ++j) {
            const double s = cosine(candidate[i], reference[j]);
            best_c[i] = std::max(best_c[i], s);
            best_r[j] = std::max(best_r[j], s);
        }
    }
    auto mean = [](const std::vector<double>& v) {
        double sum = 0.0;
        for (double x : v) sum += x;
        return sum / static_cast<double>(v.size());
    };
    BertScore out;
    out.precision = std::clamp(mean(best_c), 0.0, 1.0);
    out.recall = std::clamp(mean(best_r), 0.0, 1.0);
    const double denom = out.precision + out.recall;
    out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
    return out;
}

std::optional<BertScore> bert_score(std::string_view candidate, std::string_view reference,
                                    EmbeddingProvider& token_provider) {
    auto to_vectors = [&](std::string_view text) -> std::optional<std::vector<EmbeddingVector>> {
        auto raw = token_provider.embed_tokens(text);
        if (!raw) return std::nullopt;
        std::vector<EmbeddingVector> out;
        out.reserve(raw->size());
        for (auto& v : *raw) out.push_back(EmbeddingVector(std::move(v)).normalized());
        return out;
    };
    auto c = to_vectors(candidate);
    if (!c) return std::nullopt;
    auto r = to_vectors(reference);
    if (!r) return std::nullopt;
    return bert_score_vectors(*c, *r);
}

std::optional<double> coherence_score(std::string_view article, ChatBackend& chat, const RolePrompt& prompt,
                                      const CoherenceOptions& options, const CallContext& ctx) {
    if (options.samples < 1) throw Error(ErrorCode::Precondition, "coherence samples must be >= 1");
    const std::map<std::string, std::string> bindings{{"article", std::string(article)}};
    double sum = 0.0;
    int valid = 0;
    for (int s = 0; s < options.samples; ++s) {
        ChatRequest request;
        request.role = std::string(to_string(PromptRole::CoherenceJudge));
        request.model = options.model;
        request.system = render(prompt.system, bindings);
        request.user = render(prompt.user, bindings);
        request.temperature = options.temperature;
        request.max_tokens = 16;
        request.seed = options.seed ? std::optional<std::int64_t>(*options.seed + s) : std::nullopt;
        request.attributes = bindings;
        request.attributes["sample"] = std::to_string(s);
        try {
            const auto verdict =
                complete_structured(chat, request, Schema::integer(1, 10), options.max_reasks, ctx);
            sum += verdict.parsed->get<double>();
            ++valid;
        } catch (const Error&) {
        }
    }
    if (valid == 0) return std::nullopt;
    return sum / valid;
}

std::string_view to_string(ReferenceField f) {
    switch (f) {
        case ReferenceField::Summary: return "summary";
        case ReferenceField::Transcript: return "transcript";
        case ReferenceField::DigDeeperText: return "dig_deeper_text";
    }
    return "unknown";
}

std::optional<ReferenceField> reference_field_from_string(std::string_view s) {
    for (auto f : {ReferenceField::Summary, ReferenceField::Transcript, ReferenceField::DigDeeperText}) {
        if (to_string(f) == s) return f;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<std::string> reference_text(const Lesson& lesson, ReferenceField field) {
    switch (field) {
        case ReferenceField::Summary: return lesson.summary;
        case ReferenceField::Transcript: return lesson.transcript;
        case ReferenceField::DigDeeperText: return lesson.dig_deeper_text;
    }
    return std::nullopt;
}

class Mean {
public:
    void add(const std::optional<double>& v) {
        if (!v) return;
        sum_ += *v;
        ++n_;
    }
    std::optional<double> value() const {
        return n_ == 0 ? std::nullopt : std::optional<double>(sum_ / static_cast<double>(n_));
    }
    std::size_t count() const { return n_; }

private:
    double sum_ = 0.0;
    std::size_t n_ = 0;
};

Aggregates aggregate_metrics(const std::vector<const TextMetrics*>& metrics) {
    Mean bert, bm25, cos, coh;
    for (const auto* m : metrics) {
        bert.add(m->bert_f1);
        bm25.add(m->bm25);
        cos.add(m->cosine);
        coh.add(m->coherence);
    }
    Aggregates a;
    a.bert_score = bert.value();
    a.bm25 = bm25.value();
    a.cosine = cos.value();
    a.coherence = coh.value();
    return a;
}

TextMetrics score_text(const std::string& text, const std::string& lesson_id,
                       const std::optional<std::string>& reference, const std::optional<Bm25Index>& bm25_index,
                       Backends& backends, const EvalConfig& config, const CallContext& ctx,
                       std::vector<std::string>& errors, bool& coherence_failed) {
    TextMetrics m;
    if (reference && !reference->empty() && !text.empty()) {
        try {
            if (auto b = bert_score(text, *reference, backends.embedder)) m.bert_f1 = b->f1;
        } catch (const Error& e) {
            errors.push_back(std::string("bert_score: ") + e.what());
        }
        try {
            if (bm25_index && bm25_index->contains(lesson_id)) {
                m.bm25 = bm25_relevance_metric(text, lesson_id, *bm25_index, config.bm25, config.normalize_bm25);
            }
        } catch (const Error& e) {
            errors.push_back(std::string("bm25: ") + e.what());
        }
        try {
            const auto vectors = embed_batch(backends.embedder, {text, *reference}, ctx);
            m.cosine = cosine(vectors[0], vectors[1]);
        } catch (const Error& e) {
            errors.push_back(std::string("cosine: ") + e.what());
        }
    } else if (!reference || reference->empty()) {
        errors.push_back("reference text (" + std::string(to_string(config.reference_field)) + ") is missing");
    }
    if (config.judge_coherence && !text.empty()) {
        try {
            m.coherence = coherence_score(text, backends.chat, backends.templates.get(PromptRole::CoherenceJudge),
                                          config.coherence, ctx);
        } catch (const Error& e) {
            errors.push_back(std::string("coherence: ") + e.what());
        }
        if (!m.coherence) coherence_failed = true;
    }
    return m;
}

}  // namespace

Aggregates aggregate(const std::vector<LessonEval>& rows) {
    std::vector<const LessonEval*> ordered;
    for (const auto& r : rows) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(),
              [](const LessonEval* a, const LessonEval* b) { return a->lesson_id < b->lesson_id; });
    std::vector<const TextMetrics*> metrics;
    Mean hit, recall;
    for (const auto* r : ordered) {
        metrics.push_back(&r->generated);
        if (r->hit) hit.add(static_cast<double>(*r->hit));
        recall.add(r->recall_at_k);
    }
    Aggregates a = aggregate_metrics(metrics);
    a.hit_rate = hit.value();
    a.recall_at_k = recall.value();
    a.hit_rate_lessons = hit.count();
    return a;
}

EvalReport evaluate_run(const std::vector<PipelineResult>& results, const Corpus& corpus, Backends& backends,
                        const EvalConfig& config) {
    for (const auto& r : results) {
        if (!corpus.contains(r.lesson_id)) {
            throw Error(ErrorCode::NotFound, "result for unknown lesson " + r.lesson_id);
        }
    }
    validate(config.bm25);

    std::optional<Bm25Index> bm25_index;
    {
        std::vector<std::pair<std::string, std::string>> docs;
        std::set<std::string> seen;
        for (const auto& r : results) {
            const auto& lesson = corpus.at(r.lesson_id);
            auto ref = reference_text(lesson, config.reference_field);
            if (ref && !ref->empty() && seen.insert(lesson.id).second) docs.emplace_back(lesson.id, *ref);
        }
        if (!docs.empty()) {
            try {
                bm25_index = Bm25Index::build(docs);
            } catch (const Error&) {
                bm25_index.reset();
            }
        }
    }

    EvalReport report;
    report.per_lesson.resize(results.size());
    std::vector<int> coherence_failures(results.size(), 0);
    parallel_for(results.size(), config.parallelism, [&](std::size_t i) {
        const auto& result = results[i];
        const auto& lesson = corpus.at(result.lesson_id);
        CallContext ctx{backends.retry, backends.sleep, nullptr};
        LessonEval& row = report.per_lesson[i];
        row.lesson_id = lesson.id;

        if (!lesson.gold_links.empty()) {
            std::set<std::string> recommended;
            for (const auto& rec : result.recommendations) recommended.insert(rec.candidate_id);
            const auto h = hit_rate(recommended, {lesson.gold_links.begin(), lesson.gold_links.end()});
            row.hit = h.hit;
            row.recall_at_k = h.recall;
        }
        const auto reference = reference_text(lesson, config.reference_field);
        bool failed = false;
        row.generated = score_text(result.final_draft.text, lesson.id, reference, bm25_index, backends, config, ctx,
                                   row.errors, failed);
        if (failed) ++coherence_failures[i];
        if (lesson.dig_deeper_text && !lesson.dig_deeper_text->empty()) {
            row.category = classify_dig_deeper(*lesson.dig_deeper_text, config.thresholds);
            if (config.table3) {
                bool existing_failed = false;
                row.existing = score_text(*lesson.dig_deeper_text, lesson.id, reference, bm25_index, backends, config,
                                          ctx, row.errors, existing_failed);
                if (existing_failed) ++coherence_failures[i];
            }
        }
    });
    std::sort(report.per_lesson.begin(), report.per_lesson.end(),
              [](const LessonEval& a, const LessonEval& b) { return a.lesson_id < b.lesson_id; });
    for (int f : coherence_failures) report.coherence_failures += static_cast<std::size_t>(f);
    report.aggregates = aggregate(report.per_lesson);

    if (config.table3) {
        for (auto cat : {DigDeeperCategory::OnlyLinks, DigDeeperCategory::MainlyText,
                         DigDeeperCategory::ParagraphsWithLinks}) {
            CategoryRow row;
            row.category = cat;
            std::vector<LessonEval> members;
            std::vector<const TextMetrics*> existing;
            for (const auto& l : report.per_lesson) {
                if (l.category != cat) continue;
                members.push_back(l);
                if (l.existing) existing.push_back(&*l.existing);
            }
            row.lessons = members.size();
            row.generated = aggregate(members);
            row.existing = aggregate_metrics(existing);
            report.categories.push_back(std::move(row));
        }
    }

    Json snap;
    snap["reference_field"] = std::string(to_string(config.reference_field));
    snap["normalize_bm25"] = config.normalize_bm25;
    snap["bm25_k1"] = config.bm25.k1;
    snap["bm25_b"] = config.bm25.b;
    snap["bm25_corpus"] = "evaluation-set references";
    snap["bert_score"] = "greedy cosine, no idf, no rescaling";
    snap["embedding_provider"] = backends.embedder.tag();
    snap["judge_coherence"] = config.judge_coherence;
    snap["coherence_samples"] = config.coherence.samples;
    snap["coherence_temperature"] = config.coherence.temperature;
    snap["max_reasks"] = config.coherence.max_reasks;
    snap["hit_rate"] = "per-lesson any-gold-recovered, averaged over lessons with gold links";
    snap["k"] = config.k;
    snap["category_min_prose_words"] = config.thresholds.min_prose_words;
    snap["category_max_links_mainly_text"] = config.thresholds.max_links_mainly_text;
    snap["table3"] = config.table3;
    report.config_snapshot = std::move(snap);
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json metrics_json(const TextMetrics& m) {
    return Json{{"bert_score", opt(m.bert_f1)}, {"bm25", opt(m.bm25)}, {"cosine", opt(m.cosine)},
                {"coherence", opt(m.coherence)}};
}

Json aggregates_json(const Aggregates& a, bool with_hit) {
    Json j;
    if (with_hit) j["hit_rate"] = opt(a.hit_rate);
    j["bert_score"] = opt(a.bert_score);
    j["bm25"] = opt(a.bm25);
    j["cosine"] = opt(a.cosine);
    j["coherence"] = opt(a.coherence);
    return j;
}

std::string csv_cell(const std::optional<double>& v) { return v ? Json(*v).dump() : std::string(); }

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

Json report_to_json(const EvalReport& report) {
    Json j;
    Json rows = Json::array();
    for (const auto& l : report.per_lesson) {
        Json row;
        row["lesson_id"] = l.lesson_id;
        row["hit"] = l.hit ? Json(*l.hit) : Json(nullptr);
        row["recall_at_k"] = opt(l.recall_at_k);
        row["bert_score"] = opt(l.generated.bert_f1);
        row["bm25"] = opt(l.generated.bm25);
        row["cosine"] = opt(l.generated.cosine);
        row["coherence"] = opt(l.generated.coherence);
        row["category"] = l.category ? Json(std::string(to_string(*l.category))) : Json(nullptr);
        if (l.existing) row["existing_dig_deeper"] = metrics_json(*l.existing);
        if (!l.errors.empty()) row["errors"] = l.errors;
        rows.push_back(std::move(row));
    }
    j["per_lesson"] = std::move(rows);
    j["aggregates"] = aggregates_json(report.aggregates, true);
    j["supplementary"] = {{"recall_at_k", opt(report.aggregates.recall_at_k)},
                          {"lessons", report.per_lesson.size()},
                          {"hit_rate_lessons", report.aggregates.hit_rate_lessons},
                          {"coherence_failures", report.coherence_failures}};
    if (!report.categories.empty()) {
        Json cats = Json::array();
        for (const auto& c : report.categories) {
            cats.push_back({{"category", std::string(to_string(c.category))},
                            {"lessons", c.lessons},
                            {"generated", aggregates_json(c.generated, true)},
                            {"existing_dig_deeper", aggregates_json(c.existing, false)}});
        }
        j["categories"] = std::move(cats);
    }
    j["config_snapshot"] = report.config_snapshot;
    return j;
}

std::string report_to_csv(const EvalReport& report) {
    std::string out = "lesson_id,hit,recall_at_k,bert_score,bm25,cosine,coherence,category\n";
    for (const auto& l : report.per_lesson) {
        out += csv_quote(l.lesson_id) + "," + (l.hit ? std::to_string(*l.hit) : std::string()) + "," +
               csv_cell(l.recall_at_k) + "," + csv_cell(l.generated.bert_f1) + "," + csv_cell(l.generated.bm25) +
               "," + csv_cell(l.generated.cosine) + "," + csv_cell(l.generated.coherence) + "," +
               (l.category ? std::string(to_string(*l.category)) : std::string()) + "\n";
    }
    return out;
}

void write_report(const EvalReport& report, const std::string& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    const auto base = (std::filesystem::path(dir) / stem).string();
    std::ofstream js(base + ".json", std::ios::binary | std::ios::trunc);
    if (!js) throw Error(ErrorCode::Io, "cannot write " + base + ".json");
    js << report_to_json(report).dump(2) << '\n';
    std::ofstream csv(base + ".csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw Error(ErrorCode::Io, "cannot write " + base + ".csv");
    csv << report_to_csv(report);
}

}  // namespace digdeeper
