#include "digdeeper/corpus.hpp"

#include "digdeeper/concurrency.hpp"
#include "digdeeper/error.hpp"
#include "digdeeper/markup.hpp"
#include "digdeeper/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace digdeeper {

Corpus::Corpus(std::vector<Lesson> lessons) : lessons_(std::move(lessons)) {
    for (std::size_t i = 0; i < lessons_.size(); ++i) {
        if (!by_id_.emplace(lessons_[i].id, i).second) throw DuplicateId(lessons_[i].id);
    }
}

bool Corpus::contains(std::string_view id) const { return by_id_.count(std::string(id)) != 0; }

const Lesson& Corpus::at(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) throw Error(ErrorCode::NotFound, "unknown lesson id: " + std::string(id));
    return lessons_[it->second];
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

const char* const kKnownKeys[] = {"id", "title", "url", "transcript", "summary", "dig_deeper_text", "gold_links"};

// Returns the problem with the record, or empty when it is usable.
std::string read_lesson(const Json& obj, Lesson& out) {
    if (!obj.is_object()) return "record is not a JSON object";
    auto required_string = [&](const char* key, std::string& dst) -> std::string {
        if (!obj.contains(key)) return std::string("missing required field '") + key + "'";
        if (!obj[key].is_string()) return std::string("field '") + key + "' must be a string";
        dst = obj[key].get<std::string>();
        return {};
    };
    for (const char* key : {"id", "title", "url", "transcript"}) {
        std::string* dst = key == std::string_view("id")      ? &out.id
                           : key == std::string_view("title") ? &out.title
                           : key == std::string_view("url")   ? &out.url
                                                              : &out.transcript;
        if (auto err = required_string(key, *dst); !err.empty()) return err;
    }
    if (out.id.empty()) return "field 'id' is empty";
    if (out.title.empty()) return "field 'title' is empty";
    if (count_words(out.transcript) == 0) return "field 'transcript' has no words";
    for (const char* key : {"summary", "dig_deeper_text"}) {
        if (!obj.contains(key) || obj[key].is_null()) continue;
        if (!obj[key].is_string()) return std::string("field '") + key + "' must be a string";
        (key == std::string_view("summary") ? out.summary : out.dig_deeper_text) = obj[key].get<std::string>();
    }
    if (obj.contains("gold_links") && !obj["gold_links"].is_null()) {
        if (!obj["gold_links"].is_array()) return "field 'gold_links' must be an array";
        for (const auto& g : obj["gold_links"]) {
            if (!g.is_string()) return "field 'gold_links' must contain only strings";
            auto id = g.get<std::string>();
            if (std::find(out.gold_links.begin(), out.gold_links.end(), id) == out.gold_links.end()) {
                out.gold_links.push_back(std::move(id));
            }
        }
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), it.key()) == std::end(kKnownKeys)) {
            out.extra[it.key()] = it.value();
        }
    }
    return {};
}

}  // namespace

IngestReport parse_corpus(std::string_view jsonl, bool strict) {
    IngestReport report;
    std::vector<Lesson> lessons;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        auto nl = jsonl.find('\n', pos);
        auto line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        ++report.records;
        const std::string where = "line " + std::to_string(line_no);

        std::string problem;
        Lesson lesson;
        Json obj = Json::parse(line, nullptr, false);
        if (obj.is_discarded()) {
            problem = "malformed JSON";
        } else {
            problem = read_lesson(obj, lesson);
        }
        if (!problem.empty()) {
            if (strict) throw Error(ErrorCode::Parse, where + ": " + problem);
            ++report.skipped;
            report.warnings.push_back(where + ": skipped, " + problem);
            continue;
        }
        if (!seen.insert(lesson.id).second) throw DuplicateId(lesson.id);
        lessons.push_back(std::move(lesson));
    }

    for (auto& lesson : lessons) {
        std::vector<std::string> kept;
        for (auto& g : lesson.gold_links) {
            if (g == lesson.id) {
                report.warnings.push_back("lesson " + lesson.id + ": dropped self link");
            } else if (!seen.count(g)) {
                report.warnings.push_back("lesson " + lesson.id + ": dropped gold link to unknown lesson " + g);
            } else {
                kept.push_back(std::move(g));
            }
        }
        lesson.gold_links = std::move(kept);
    }
    report.corpus = Corpus(std::move(lessons));
    return report;
}

IngestReport ingest_corpus(const std::string& path, bool strict) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read corpus file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_corpus(buf.str(), strict);
}

Json lesson_to_json(const Lesson& lesson) {
    Json j;
    j["id"] = lesson.id;
    j["title"] = lesson.title;
    j["url"] = lesson.url;
    j["transcript"] = lesson.transcript;
    if (lesson.summary) j["summary"] = *lesson.summary;
    if (lesson.dig_deeper_text) j["dig_deeper_text"] = *lesson.dig_deeper_text;
    j["gold_links"] = lesson.gold_links;
    for (auto it = lesson.extra.begin(); it != lesson.extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

std::string write_corpus_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& lesson : corpus.lessons()) {
        out += lesson_to_json(lesson).dump();
        out.push_back('\n');
    }
    return out;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write corpus file: " + path);
    out << write_corpus_jsonl(corpus);
    if (!out) throw Error(ErrorCode::Io, "failed writing corpus file: " + path);
}

// ---------------------------------------------------------------------------
// Summarization

std::string_view to_string(SummaryStatus status) {
    switch (status) {
        case SummaryStatus::Ok: return "ok";
        case SummaryStatus::OutOfBand: return "out_of_band";
        case SummaryStatus::Failed: return "failed";
        case SummaryStatus::Skipped: return "skipped";
    }
    return "unknown";
}

std::size_t SummarizeReport::count(SummaryStatus s) const {
    return static_cast<std::size_t>(
        std::count_if(outcomes.begin(), outcomes.end(), [&](const SummaryOutcome& o) { return o.status == s; }));
}

SummarizeReport summarize_corpus(const Corpus& corpus, ChatBackend& backend, const TemplateSet& templates,
                                 const SummarizeOptions& options, const CallContext& ctx) {
    if (options.target_words < 30) throw Error(ErrorCode::Precondition, "target_words must be >= 30");
    const auto target = static_cast<double>(options.target_words);
    const auto lo = static_cast<std::size_t>(std::ceil(target * (1.0 - options.band)));
    const auto hi = static_cast<std::size_t>(std::floor(target * (1.0 + options.band)));
    const auto& prompt = templates.get(PromptRole::Summarizer);

    std::vector<Lesson> lessons = corpus.lessons();
    std::vector<SummaryOutcome> outcomes(lessons.size());

    parallel_for(lessons.size(), options.parallelism, [&](std::size_t i) {
        Lesson& lesson = lessons[i];
        SummaryOutcome& outcome = outcomes[i];
        outcome.lesson_id = lesson.id;
        if (lesson.summary && !options.force) {
            outcome.status = SummaryStatus::Skipped;
            outcome.words = count_words(*lesson.summary);
            return;
        }
        const std::size_t transcript_words = count_words(lesson.transcript);
        if (transcript_words < options.target_words) {
            lesson.summary = lesson.transcript;
            outcome.words = transcript_words;
            outcome.status = transcript_words >= lo ? SummaryStatus::Ok : SummaryStatus::OutOfBand;
            return;
        }
        const std::map<std::string, std::string> bindings{
            {"title", lesson.title},
            {"transcript", lesson.transcript},
            {"target_words", std::to_string(options.target_words)}};
        ChatRequest request;
        request.role = std::string(to_string(PromptRole::Summarizer));
        request.model = options.model;
        request.system = render(prompt.system, bindings);
        request.user = render(prompt.user, bindings);
        request.temperature = options.temperature;
        request.max_tokens = options.max_tokens;
        request.attributes = bindings;

        std::string text;
        try {
            for (int attempt = 0; attempt <= options.max_reprompts; ++attempt) {
                ++outcome.attempts;
                text = complete(backend, request, ctx).text;
                const auto words = count_words(text);
                if (words >= lo && words <= hi) break;
                request.user = render(prompt.user, bindings) + "\n\nYour previous summary had " +
                               std::to_string(words) + " words. Rewrite it to between " + std::to_string(lo) +
                               " and " + std::to_string(hi) + " words.";
            }
        } catch (const Error& e) {
            outcome.status = SummaryStatus::Failed;
            outcome.error = e.what();
            return;
        }
        outcome.words = count_words(text);
        outcome.status = (outcome.words >= lo && outcome.words <= hi) ? SummaryStatus::Ok : SummaryStatus::OutOfBand;
        lesson.summary = std::move(text);
    });

    SummarizeReport report;
    report.corpus = Corpus(std::move(lessons));
    report.outcomes = std::move(outcomes);
    return report;
}

// ---------------------------------------------------------------------------
// Classifier

std::string_view to_string(DigDeeperCategory c) {
    switch (c) {
        case DigDeeperCategory::OnlyLinks: return "only_links";
        case DigDeeperCategory::MainlyText: return "mainly_text";
        case DigDeeperCategory::ParagraphsWithLinks: return "paragraphs_with_links";
    }
    return "unknown";
}

std::optional<DigDeeperCategory> category_from_string(std::string_view s) {
    for (auto c : {DigDeeperCategory::OnlyLinks, DigDeeperCategory::MainlyText,
                   DigDeeperCategory::ParagraphsWithLinks}) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

DigDeeperFeatures dig_deeper_features(std::string_view text) {
    DigDeeperFeatures f;
    f.link_count = find_links(text).size();
    const auto prose = strip_links(text);
    std::istringstream words(prose);
    std::string w;
    while (words >> w) {
        if (std::any_of(w.begin(), w.end(), [](unsigned char c) { return std::isalnum(c) || c >= 0x80; })) {
            ++f.prose_words;
        }
    }
    f.paragraph_count = split_paragraphs(text).size();
    return f;
}

DigDeeperCategory classify_dig_deeper(std::string_view text, const CategoryThresholds& thresholds) {
    if (text.empty()) throw Error(ErrorCode::Precondition, "cannot classify empty text");
    const auto f = dig_deeper_features(text);
    if (f.prose_words < thresholds.min_prose_words) return DigDeeperCategory::OnlyLinks;
    if (f.link_count <= thresholds.max_links_mainly_text) return DigDeeperCategory::MainlyText;
    return DigDeeperCategory::ParagraphsWithLinks;
}

}  // namespace digdeeper
