#pragma once

#include "digdeeper/json.hpp"
#include "digdeeper/llm.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace digdeeper {

struct Lesson {
    std::string id;
    std::string title;
    std::string url;
    std::string transcript;
    std::optional<std::string> summary;
    std::optional<std::string> dig_deeper_text;
    std::vector<std::string> gold_links;  // unique, ingest order
    Json extra = Json::object();          // unknown keys, preserved on rewrite

    bool operator==(const Lesson&) const = default;
};

/// Immutable-after-ingest lesson collection in ingest order.
class Corpus {
public:
    Corpus() = default;
    /// Throws DuplicateId. Does not validate gold links; see ingest_corpus.
    explicit Corpus(std::vector<Lesson> lessons);

    std::size_t lesson_count() const noexcept { return lessons_.size(); }
    const std::vector<Lesson>& lessons() const noexcept { return lessons_; }
    bool contains(std::string_view id) const;
    const Lesson& at(std::string_view id) const;  // throws NotFound

    bool operator==(const Corpus& other) const { return lessons_ == other.lessons_; }

private:
    std::vector<Lesson> lessons_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

struct IngestReport {
    Corpus corpus;
    std::size_t records = 0;  // nonblank input lines
    std::size_t skipped = 0;
    std::vector<std::string> warnings;
};

/// Reads the corpus JSONL format. Strict mode aborts on any malformed record;
/// otherwise such records are skipped and counted. Duplicate ids are always fatal.
IngestReport ingest_corpus(const std::string& path, bool strict);
IngestReport parse_corpus(std::string_view jsonl, bool strict);

Json lesson_to_json(const Lesson& lesson);
std::string write_corpus_jsonl(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::string& path);

// ---------------------------------------------------------------------------
// Uniform-length summarization

struct SummarizeOptions {
    std::size_t target_words = 150;
    double band = 0.20;
    int max_reprompts = 2;
    bool force = false;
    std::size_t parallelism = 4;
    std::string model;
    double temperature = 0.7;
    int max_tokens = 1024;
};

enum class SummaryStatus { Ok, OutOfBand, Failed, Skipped };

std::string_view to_string(SummaryStatus status);

struct SummaryOutcome {
    std::string lesson_id;
    SummaryStatus status = SummaryStatus::Ok;
    int attempts = 0;
    std::size_t words = 0;
    std::string error;
};

struct SummarizeReport {
    Corpus corpus;
    std::vector<SummaryOutcome> outcomes;  // lesson order
    std::size_t count(SummaryStatus s) const;
};

/// Fills every lesson's summary to target_words +/- band. Transcripts shorter than the
/// target pass through verbatim; they are out-of-band only when below the band.
SummarizeReport summarize_corpus(const Corpus& corpus, ChatBackend& backend, const TemplateSet& templates,
                                 const SummarizeOptions& options, const CallContext& ctx);

// ---------------------------------------------------------------------------
// Dig Deeper category classifier

enum class DigDeeperCategory { OnlyLinks, MainlyText, ParagraphsWithLinks };

std::string_view to_string(DigDeeperCategory c);
std::optional<DigDeeperCategory> category_from_string(std::string_view s);

struct CategoryThresholds {
    std::size_t min_prose_words = 50;    // below: OnlyLinks
    std::size_t max_links_mainly_text = 2;  // at or below: MainlyText
};

struct DigDeeperFeatures {
    std::size_t prose_words = 0;
    std::size_t link_count = 0;
    std::size_t paragraph_count = 0;
};

DigDeeperFeatures dig_deeper_features(std::string_view text);
DigDeeperCategory classify_dig_deeper(std::string_view text, const CategoryThresholds& thresholds = {});

}  // namespace digdeeper
