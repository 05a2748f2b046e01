#include "digdeeper/pipeline.hpp"

#include "digdeeper/error.hpp"
#include "digdeeper/markup.hpp"
#include "digdeeper/text.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace digdeeper {

std::string_view to_string(DraftStage stage) { return stage == DraftStage::Initial ? "initial" : "final"; }

std::string_view to_string(PipelineMode mode) {
    switch (mode) {
        case PipelineMode::Full: return "full";
        case PipelineMode::SkipStage1: return "skip-stage1";
        case PipelineMode::SkipStage3: return "skip-stage3";
    }
    return "unknown";
}

std::optional<PipelineMode> mode_from_string(std::string_view s) {
    for (auto m : {PipelineMode::Full, PipelineMode::SkipStage1, PipelineMode::SkipStage3}) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

namespace {

ChatRequest make_request(PromptRole role, const RolePrompt& prompt, const std::map<std::string, std::string>& bindings,
                         const PipelineConfig& config, double temperature) {
    ChatRequest r;
    r.role = std::string(to_string(role));
    r.model = config.model;
    r.system = render(prompt.system, bindings);
    r.user = render(prompt.user, bindings);
    r.temperature = temperature;
    r.max_tokens = config.max_tokens;
    r.seed = config.seed;
    r.attributes = bindings;
    return r;
}

std::string candidate_text(const Lesson& lesson) {
    return lesson.summary ? *lesson.summary : first_words(lesson.transcript, 150);
}

}  // namespace

// ---------------------------------------------------------------------------
// Stage 1

ArticleDraft generate_initial_article(const Lesson& lesson, ChatBackend& chat, const RolePrompt& prompt,
                                      const PipelineConfig& config, const CallContext& ctx) {
    if (count_words(lesson.transcript) == 0) {
        throw Error(ErrorCode::Precondition, "lesson " + lesson.id + " has an empty transcript");
    }
    const std::map<std::string, std::string> bindings{
        {"title", lesson.title},
        {"transcript", lesson.transcript},
        {"min_words", std::to_string(config.min_article_words)},
        {"max_words", std::to_string(config.max_article_words)}};
    auto request = make_request(PromptRole::Stage1Generator, prompt, bindings, config, config.generation_temperature);
    const std::string base_user = request.user;

    ArticleDraft draft;
    draft.lesson_id = lesson.id;
    draft.stage = DraftStage::Initial;
    draft.model_tag = config.model.empty() ? chat.tag() : config.model;
    std::size_t words = 0;
    for (int attempt = 0; attempt <= config.length_reprompts; ++attempt) {
        draft.text = complete(chat, request, ctx).text;
        words = count_words(draft.text);
        if (words >= config.min_article_words && words <= config.max_article_words) return draft;
        request.user = base_user + "\n\nYour previous article had " + std::to_string(words) +
                       " words. Write it again with between " + std::to_string(config.min_article_words) +
                       " and " + std::to_string(config.max_article_words) + " words.";
    }
    draft.flags.push_back(words < config.min_article_words ? "initial_under_length" : "initial_over_length");
    return draft;
}

// ---------------------------------------------------------------------------
// Stage 2

CandidateRanking retrieve_candidates(std::string_view draft_text, const DenseIndex& index,
                                     EmbeddingProvider& provider, std::size_t pool_size,
                                     const std::string& source_lesson, const CallContext& ctx) {
    if (pool_size < 1) throw Error(ErrorCode::Precondition, "pool_size must be >= 1");
    const auto query = embed(provider, draft_text, ctx);
    CandidateRanking ranking;
    ranking.source_lesson = source_lesson;
    ranking.entries = top_k(index, query, pool_size, {source_lesson});
    return ranking;
}

Schema rerank_schema(const std::vector<std::string>& ids) {
    auto record = Schema::object({{"candidate_id", Schema::string()},
                                  {"related_keywords", Schema::string_list()},
                                  {"keyword_match", Schema::boolean()},
                                  {"relevance", Schema::integer(0, 10)},
                                  {"context_alignment", Schema::boolean()},
                                  {"overall", Schema::integer(0, 10)}});
    record.check = [](const Json& j) -> std::optional<std::string> {
        if (j["keyword_match"].get<bool>() && j["related_keywords"].empty()) {
            return "candidate " + j["candidate_id"].get<std::string>() +
                   " has keyword_match true but no related_keywords";
        }
        return std::nullopt;
    };
    auto schema = Schema::object({{"judgments", Schema::array(std::move(record))}});
    schema.check = [ids](const Json& j) -> std::optional<std::string> {
        std::map<std::string, int> seen;
        for (const auto& item : j["judgments"]) ++seen[item["candidate_id"].get<std::string>()];
        for (const auto& id : ids) {
            auto it = seen.find(id);
            if (it == seen.end()) return "no judgment for candidate " + id;
            if (it->second > 1) return "more than one judgment for candidate " + id;
        }
        if (seen.size() != ids.size()) return "judgments mention candidates that were not listed";
        return std::nullopt;
    };
    return schema;
}

RerankOutcome rerank(const ArticleDraft& draft, const CandidateRanking& candidates, const Corpus& corpus,
                     ChatBackend& chat, const RolePrompt& prompt, const PipelineConfig& config,
                     const CallContext& ctx) {
    if (candidates.entries.empty()) throw Error(ErrorCode::Precondition, "rerank needs at least one candidate");
    const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
    RerankOutcome outcome;
    outcome.judgments.resize(candidates.entries.size());

    // Judges entries [begin, end); returns false when the reply never validated.
    auto judge_range = [&](std::size_t begin, std::size_t end) -> bool {
        std::vector<std::string> ids;
        Json listed = Json::array();
        std::string rendered;
        for (std::size_t i = begin; i < end; ++i) {
            const auto& lesson = corpus.at(candidates.entries[i].id);
            ids.push_back(lesson.id);
            const auto text = candidate_text(lesson);
            listed.push_back({{"id", lesson.id}, {"title", lesson.title}, {"text", text}});
            rendered += "- id: " + lesson.id + "\n  title: " + lesson.title + "\n  summary: " + text + "\n";
        }
        const std::map<std::string, std::string> bindings{
            {"article", draft.text}, {"candidates", rendered}, {"count", std::to_string(ids.size())}};
        auto request = make_request(PromptRole::Reranker, prompt, bindings, config, config.judge_temperature);
        request.attributes["candidates"] = listed.dump();
        try {
            const auto verdict = complete_structured(chat, request, rerank_schema(ids), config.max_reasks, ctx);
            std::map<std::string, const Json*> by_id;
            for (const auto& item : (*verdict.parsed)["judgments"]) by_id[item["candidate_id"].get<std::string>()] = &item;
            for (std::size_t i = begin; i < end; ++i) {
                const Json& item = *by_id.at(candidates.entries[i].id);
                RerankJudgment& j = outcome.judgments[i];
                j.candidate_id = candidates.entries[i].id;
                j.related_keywords = item["related_keywords"].get<std::vector<std::string>>();
                j.keyword_match = item["keyword_match"].get<bool>();
                j.relevance = item["relevance"].get<int>();
                j.context_alignment = item["context_alignment"].get<bool>();
                j.overall = item["overall"].get<int>();
                j.failed = false;
            }
            return true;
        } catch (const Error& e) {
            outcome.warnings.push_back("rerank of candidates [" + std::to_string(begin) + ", " + std::to_string(end) +
                                       ") failed: " + e.what());
            return false;
        }
    };

    for (std::size_t begin = 0; begin < candidates.entries.size(); begin += batch_size) {
        const std::size_t end = std::min(candidates.entries.size(), begin + batch_size);
        if (judge_range(begin, end)) continue;
        for (std::size_t i = begin; i < end; ++i) {
            if (end - begin > 1 && judge_range(i, i + 1)) continue;
            outcome.judgments[i] = RerankJudgment{};
            outcome.judgments[i].candidate_id = candidates.entries[i].id;
            outcome.judgments[i].failed = true;
        }
    }
    const bool all_failed = std::all_of(outcome.judgments.begin(), outcome.judgments.end(),
                                        [](const RerankJudgment& j) { return j.failed; });
    if (all_failed) outcome.warnings.push_back("every rerank judgment failed");
    return outcome;
}

std::vector<Selection> select_recommendations(const std::vector<RerankJudgment>& judgments,
                                              const CandidateRanking& ranking, std::size_t k) {
    if (k < 1) throw Error(ErrorCode::Precondition, "k must be >= 1");
    std::map<std::string, double> score_of;
    for (const auto& e : ranking.entries) score_of[e.id] = e.score;
    std::vector<Selection> pool;
    for (const auto& j : judgments) {
        if (j.failed) continue;
        auto it = score_of.find(j.candidate_id);
        if (it == score_of.end()) continue;
        pool.push_back({j.candidate_id, j.related_keywords.empty() ? std::string() : j.related_keywords.front(),
                        it->second, j});
    }
    std::sort(pool.begin(), pool.end(), [](const Selection& a, const Selection& b) {
        if (a.judgment.overall != b.judgment.overall) return a.judgment.overall > b.judgment.overall;
        if (a.cosine != b.cosine) return a.cosine > b.cosine;
        return a.candidate_id < b.candidate_id;
    });
    if (pool.size() > k) pool.resize(k);
    return pool;
}

// ---------------------------------------------------------------------------
// Stage 3

std::vector<KeywordAnchor> anchor_keywords(std::string_view text, const std::vector<Selection>& selections) {
    std::vector<KeywordAnchor> anchors;
    anchors.reserve(selections.size());
    for (const auto& s : selections) {
        KeywordAnchor a;
        a.candidate_id = s.candidate_id;
        a.keyword = s.keyword;
        if (auto pos = find_whole_word(text, s.keyword)) {
            a.begin = *pos;
            a.end = *pos + s.keyword.size();
            a.matched = true;
        }
        anchors.push_back(std::move(a));
    }
    return anchors;
}

std::vector<Recommendation> bind_recommendations(const std::vector<Selection>& selections,
                                                 const std::vector<KeywordAnchor>& anchors, const Corpus& corpus) {
    std::vector<Recommendation> out;
    for (std::size_t i = 0; i < selections.size(); ++i) {
        const auto& lesson = corpus.at(selections[i].candidate_id);
        Recommendation r;
        r.candidate_id = lesson.id;
        r.title = lesson.title;
        r.url = lesson.url;
        r.anchor = i < anchors.size() ? anchors[i] : KeywordAnchor{lesson.id, selections[i].keyword, 0, 0, false};
        r.judgment = selections[i].judgment;
        out.push_back(std::move(r));
    }
    return out;
}

std::string link_block(std::string_view heading, const std::vector<Recommendation>& recommendations) {
    std::string out(heading);
    out += "\n";
    for (const auto& r : recommendations) out += "\n- " + format_link(r.title, r.url);
    return out;
}

namespace {

std::vector<Selection> selections_of(const std::vector<Recommendation>& recs) {
    std::vector<Selection> out;
    for (const auto& r : recs) out.push_back({r.candidate_id, r.anchor.keyword, 0.0, r.judgment});
    return out;
}

// Links that do not appear exactly once, split into missing and duplicated.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> link_problems(
    std::string_view text, const std::vector<Recommendation>& recs) {
    std::vector<std::size_t> missing;
    std::vector<std::size_t> duplicated;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto n = count_occurrences(text, format_link(recs[i].title, recs[i].url));
        if (n == 0) missing.push_back(i);
        if (n > 1) duplicated.push_back(i);
    }
    return {missing, duplicated};
}

}  // namespace

ArticleDraft generate_final_article(const ArticleDraft& draft, const std::vector<Recommendation>& recommendations,
                                    const std::string& lesson_title, ChatBackend& chat, const RolePrompt& prompt,
                                    const PipelineConfig& config, const CallContext& ctx) {
    std::string rendered;
    Json listed = Json::array();
    for (const auto& r : recommendations) {
        const bool present = r.anchor.matched;
        rendered += "- " + format_link(r.title, r.url) + " | keyword: \"" + r.anchor.keyword + "\" (" +
                    (present ? "already in the article" : "not yet in the article") + ")\n";
        listed.push_back({{"candidate_id", r.candidate_id},
                          {"title", r.title},
                          {"url", r.url},
                          {"keyword", r.anchor.keyword},
                          {"matched", present}});
    }
    if (recommendations.empty()) rendered = "(none: keep the article's content and only polish its style)\n";
    const std::map<std::string, std::string> bindings{
        {"title", lesson_title}, {"article", draft.text}, {"recommendations", rendered}};
    auto request = make_request(PromptRole::Stage3Rewriter, prompt, bindings, config, config.generation_temperature);
    request.attributes["recommendations"] = listed.dump();
    const std::string base_user = request.user;

    ArticleDraft out;
    out.lesson_id = draft.lesson_id;
    out.stage = DraftStage::Final;
    out.model_tag = config.model.empty() ? chat.tag() : config.model;
    out.text = complete(chat, request, ctx).text;

    auto [missing, duplicated] = link_problems(out.text, recommendations);
    if (!missing.empty() || !duplicated.empty()) {
        std::string fix = "\n\nYour previous rewrite did not include every recommendation link exactly once.";
        for (auto i : missing) fix += "\nMissing: " + format_link(recommendations[i].title, recommendations[i].url);
        for (auto i : duplicated) {
            fix += "\nRepeated: " + format_link(recommendations[i].title, recommendations[i].url);
        }
        fix += "\nRewrite the article again so that each link appears exactly once.";
        request.user = base_user + fix;
        request.attributes["attempt"] = "2";
        out.text = complete(chat, request, ctx).text;
        std::tie(missing, duplicated) = link_problems(out.text, recommendations);
    }
    if (!missing.empty()) {
        std::vector<Recommendation> absent;
        for (auto i : missing) absent.push_back(recommendations[i]);
        out.text += "\n\n" + link_block("Further viewing:", absent);
        out.flags.push_back("links_missing_after_rewrite");
    }
    if (!duplicated.empty()) out.flags.push_back("links_duplicated_after_rewrite");
    out.anchors = anchor_keywords(out.text, selections_of(recommendations));
    return out;
}

// ---------------------------------------------------------------------------
// Orchestration

PipelineResult run_pipeline(const Lesson& lesson, const Corpus& corpus, const DenseIndex& index,
                            Backends& backends, const PipelineConfig& config, PipelineMode mode) {
    CallTrace trace;
    CallContext ctx{backends.retry, backends.sleep, &trace};
    PipelineResult result;
    result.lesson_id = lesson.id;
    result.title = lesson.title;
    result.mode = mode;

    if (mode == PipelineMode::SkipStage1) {
        if (!lesson.summary || lesson.summary->empty()) {
            throw Error(ErrorCode::Precondition, "lesson " + lesson.id + " has no summary for skip-stage1 mode");
        }
        result.initial.lesson_id = lesson.id;
        result.initial.stage = DraftStage::Initial;
        result.initial.text = *lesson.summary;
        result.initial.model_tag = "summary";
    } else {
        result.initial = generate_initial_article(lesson, backends.chat, backends.templates.get(PromptRole::Stage1Generator),
                                                  config, ctx);
    }
    for (const auto& f : result.initial.flags) result.flags.push_back(f);

    result.pool = retrieve_candidates(result.initial.text, index, backends.embedder, config.pool_size, lesson.id, ctx);
    std::vector<Selection> selections;
    if (result.pool.entries.empty()) {
        result.flags.push_back("empty_candidate_pool");
    } else {
        auto outcome = rerank(result.initial, result.pool, corpus, backends.chat,
                              backends.templates.get(PromptRole::Reranker), config, ctx);
        result.judgments = std::move(outcome.judgments);
        if (std::any_of(result.judgments.begin(), result.judgments.end(), [](const auto& j) { return j.failed; })) {
            result.flags.push_back("rerank_failures");
        }
        selections = select_recommendations(result.judgments, result.pool, config.k);
    }
    if (selections.empty()) result.flags.push_back("no_recommendations");

    if (mode == PipelineMode::SkipStage3) {
        result.final_draft = result.initial;
        result.final_draft.stage = DraftStage::Final;
        result.final_draft.model_tag = "none";
        result.final_draft.flags.clear();
        const auto anchors = anchor_keywords(result.initial.text, selections);
        result.recommendations = bind_recommendations(selections, anchors, corpus);
        if (!result.recommendations.empty()) {
            result.final_draft.text += "\n\n" + link_block("Related lessons:", result.recommendations);
        }
        result.final_draft.anchors = anchor_keywords(result.final_draft.text, selections);
    } else {
        const auto anchors = anchor_keywords(result.initial.text, selections);
        auto recs = bind_recommendations(selections, anchors, corpus);
        result.final_draft = generate_final_article(result.initial, recs, lesson.title, backends.chat,
                                                    backends.templates.get(PromptRole::Stage3Rewriter), config, ctx);
        for (const auto& f : result.final_draft.flags) result.flags.push_back(f);
        result.recommendations = std::move(recs);
    }
    // Persisted anchors refer to the final article text.
    for (std::size_t i = 0; i < result.recommendations.size() && i < result.final_draft.anchors.size(); ++i) {
        result.recommendations[i].anchor = result.final_draft.anchors[i];
    }
    result.trace = trace.records();
    return result;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

Json result_to_json(const PipelineResult& r) {
    Json j;
    j["lesson_id"] = r.lesson_id;
    j["title"] = r.title;
    j["mode"] = std::string(to_string(r.mode));
    j["initial_article"] = r.initial.text;
    j["final_article"] = r.final_draft.text;
    Json recs = Json::array();
    for (const auto& rec : r.recommendations) {
        recs.push_back({{"candidate_id", rec.candidate_id},
                        {"title", rec.title},
                        {"url", rec.url},
                        {"keyword", rec.anchor.keyword},
                        {"span", {rec.anchor.begin, rec.anchor.end}},
                        {"matched", rec.anchor.matched},
                        {"overall", rec.judgment.overall},
                        {"relevance", rec.judgment.relevance}});
    }
    j["recommendations"] = std::move(recs);
    Json pool = Json::array();
    for (const auto& e : r.pool.entries) pool.push_back({{"candidate_id", e.id}, {"cosine", e.score}});
    j["candidate_pool"] = std::move(pool);
    Json judgments = Json::array();
    for (const auto& jd : r.judgments) {
        judgments.push_back({{"candidate_id", jd.candidate_id},
                             {"related_keywords", jd.related_keywords},
                             {"keyword_match", jd.keyword_match},
                             {"relevance", jd.relevance},
                             {"context_alignment", jd.context_alignment},
                             {"overall", jd.overall},
                             {"failed", jd.failed}});
    }
    j["judgments"] = std::move(judgments);
    j["flags"] = r.flags;
    Json trace = Json::array();
    for (const auto& c : r.trace) {
        Json t{{"role", c.role}, {"model", c.model}, {"attempts", c.attempts}, {"ok", c.ok},
               {"prompt_hash", hex64(c.prompt_hash)}};
        if (!c.error.empty()) t["error"] = c.error;
        if (!c.backoff.empty()) {
            Json delays = Json::array();
            for (auto d : c.backoff) delays.push_back(d.count());
            t["backoff_ms"] = std::move(delays);
        }
        trace.push_back(std::move(t));
    }
    j["trace"] = std::move(trace);
    return j;
}

PipelineResult result_from_json(const Json& j) {
    PipelineResult r;
    try {
        r.lesson_id = j.at("lesson_id").get<std::string>();
        r.title = j.value("title", "");
        auto mode = mode_from_string(j.at("mode").get<std::string>());
        if (!mode) throw Error(ErrorCode::Format, "unknown mode in result " + r.lesson_id);
        r.mode = *mode;
        r.initial.lesson_id = r.final_draft.lesson_id = r.lesson_id;
        r.initial.text = j.at("initial_article").get<std::string>();
        r.final_draft.stage = DraftStage::Final;
        r.final_draft.text = j.at("final_article").get<std::string>();
        r.pool.source_lesson = r.lesson_id;
        for (const auto& e : j.value("candidate_pool", Json::array())) {
            r.pool.entries.push_back({e.at("candidate_id").get<std::string>(), e.at("cosine").get<double>()});
        }
        for (const auto& jd : j.value("judgments", Json::array())) {
            RerankJudgment x;
            x.candidate_id = jd.at("candidate_id").get<std::string>();
            x.related_keywords = jd.at("related_keywords").get<std::vector<std::string>>();
            x.keyword_match = jd.at("keyword_match").get<bool>();
            x.relevance = jd.at("relevance").get<int>();
            x.context_alignment = jd.at("context_alignment").get<bool>();
            x.overall = jd.at("overall").get<int>();
            x.failed = jd.at("failed").get<bool>();
            r.judgments.push_back(std::move(x));
        }
        for (const auto& rec : j.at("recommendations")) {
            Recommendation x;
            x.candidate_id = rec.at("candidate_id").get<std::string>();
            x.title = rec.value("title", "");
            x.url = rec.value("url", "");
            x.anchor.candidate_id = x.candidate_id;
            x.anchor.keyword = rec.value("keyword", "");
            const auto& span = rec.at("span");
            x.anchor.begin = span.at(0).get<std::size_t>();
            x.anchor.end = span.at(1).get<std::size_t>();
            x.anchor.matched = rec.value("matched", false);
            auto full = std::find_if(r.judgments.begin(), r.judgments.end(),
                                     [&](const RerankJudgment& jd) { return jd.candidate_id == x.candidate_id; });
            if (full != r.judgments.end()) {
                x.judgment = *full;
            } else {
                x.judgment.candidate_id = x.candidate_id;
                x.judgment.overall = rec.value("overall", 0);
                x.judgment.relevance = rec.value("relevance", 0);
            }
            r.final_draft.anchors.push_back(x.anchor);
            r.recommendations.push_back(std::move(x));
        }
        r.flags = j.value("flags", std::vector<std::string>{});
        for (const auto& t : j.value("trace", Json::array())) {
            CallRecord c;
            c.role = t.value("role", "");
            c.model = t.value("model", "");
            c.attempts = t.value("attempts", 0);
            c.ok = t.value("ok", false);
            c.error = t.value("error", "");
            c.prompt_hash = std::stoull(t.value("prompt_hash", "0"), nullptr, 16);
            for (const auto& d : t.value("backoff_ms", Json::array())) {
                c.backoff.emplace_back(d.get<std::int64_t>());
            }
            r.trace.push_back(std::move(c));
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Format, std::string("malformed pipeline result: ") + e.what());
    }
    return r;
}

std::string result_markdown(const PipelineResult& result) {
    return "# " + (result.title.empty() ? result.lesson_id : result.title) + ": Dig Deeper\n\n" +
           result.final_draft.text + "\n";
}

std::string file_stem(std::string_view lesson_id) {
    std::string out;
    for (char c : lesson_id) {
        const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        out.push_back(safe ? c : '_');
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

void write_result(const PipelineResult& result, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const auto stem = std::filesystem::path(dir) / file_stem(result.lesson_id);
    {
        std::ofstream out(stem.string() + ".json", std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + stem.string() + ".json");
        out << result_to_json(result).dump(2) << '\n';
    }
    std::ofstream md(stem.string() + ".md", std::ios::binary | std::ios::trunc);
    if (!md) throw Error(ErrorCode::Io, "cannot write " + stem.string() + ".md");
    md << result_markdown(result);
}

std::vector<PipelineResult> load_results(const std::string& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::Io, "results directory not found: " + dir);
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<PipelineResult> results;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        Json j = Json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("final_article")) continue;
        results.push_back(result_from_json(j));
    }
    std::sort(results.begin(), results.end(),
              [](const PipelineResult& a, const PipelineResult& b) { return a.lesson_id < b.lesson_id; });
    return results;
}

}  // namespace digdeeper
