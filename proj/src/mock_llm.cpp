#include "digdeeper/error.hpp"
#include "digdeeper/llm.hpp"
#include "digdeeper/markup.hpp"
#include "digdeeper/text.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

namespace digdeeper {

namespace {

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "about",  "above",  "after",  "again",   "against", "almost", "along",   "already",
        "also",   "although", "always", "among", "another", "around", "because", "become",
        "becomes", "before", "being",  "below",  "between", "could",  "during",  "either",
        "every",  "first",  "found",  "from",    "further", "going",  "having",  "however",
        "into",   "itself", "known",  "later",   "least",   "makes",  "might",   "more",
        "most",   "much",   "never",  "other",   "others",  "over",   "people",  "perhaps",
        "rather", "really", "right",  "several", "should",  "since",  "something", "still",
        "such",   "their",  "there",  "these",   "they",    "thing",  "things",  "think",
        "those",  "though", "three",  "through", "today",   "together", "under", "until",
        "using",  "video",  "watch",  "well",    "were",    "what",   "when",    "where",
        "which",  "while",  "whole",  "with",    "within",  "without", "would",  "years",
        "your",   "lesson", "lessons", "called", "different", "example", "important",
        "story",  "stories", "world", "whose",   "often",   "began",  "still",   "because"};
    return words;
}

bool is_content_term(const std::string& token, std::size_t min_len) {
    return token.size() >= min_len && !stopwords().count(token) &&
           !std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Content terms ranked by frequency, then by first appearance.
std::vector<std::string> salient_terms(std::string_view text, std::size_t min_len, std::size_t limit) {
    const auto tokens = tokenize(text);
    std::map<std::string, std::pair<std::size_t, std::size_t>> stats;  // term -> (count, first)
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!is_content_term(tokens[i], min_len)) continue;
        auto [it, inserted] = stats.emplace(tokens[i], std::make_pair(0, i));
        ++it->second.first;
    }
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> ranked(stats.begin(), stats.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.second.second < b.second.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && out.size() < limit; ++i) out.push_back(ranked[i].first);
    return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        current.push_back(c == '\n' ? ' ' : c);
        if (c == '.' || c == '!' || c == '?') {
            auto b = current.find_first_not_of(' ');
            if (b != std::string::npos) out.push_back(current.substr(b));
            current.clear();
        }
    }
    auto b = current.find_first_not_of(' ');
    if (b != std::string::npos) {
        auto s = current.substr(b);
        while (!s.empty() && s.back() == ' ') s.pop_back();
        if (!s.empty()) out.push_back(s + ".");
    }
    return out;
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::size_t attr_size(const ChatRequest& r, const char* key, std::size_t fallback) {
    auto it = r.attributes.find(key);
    if (it == r.attributes.end()) return fallback;
    try {
        return static_cast<std::size_t>(std::stoul(it->second));
    } catch (const std::exception&) {
        return fallback;
    }
}

std::string attr(const ChatRequest& r, const char* key) {
    auto it = r.attributes.find(key);
    return it == r.attributes.end() ? std::string() : it->second;
}

bool faulted(MockFault fault, const ChatRequest& r) {
    if (fault == MockFault::AlwaysMalformed) return true;
    return fault == MockFault::MalformedFirstAttempt && attr(r, "attempt") == "1";
}

std::string summarize(const ChatRequest& r) {
    return first_words(attr(r, "transcript"), attr_size(r, "target_words", 150));
}

std::string generate_article(const ChatRequest& r) {
    const std::string title = attr(r, "title");
    const std::string transcript = attr(r, "transcript");
    const std::size_t min_words = attr_size(r, "min_words", 300);
    const std::size_t max_words = attr_size(r, "max_words", 800);
    const auto sentences = split_sentences(transcript);
    const auto terms = salient_terms(transcript, 6, 6);

    auto sentence_with = [&](const std::string& term) -> std::string {
        for (const auto& s : sentences) {
            if (find_whole_word(s, term, false)) return s;
        }
        return {};
    };

    static const char* const kFacets[] = {
        "Historical records show that {T} has a longer past than most viewers expect. {S} Tracing "
        "how earlier generations described {T} reveals which questions stayed open and which were "
        "settled by new evidence.",
        "The terminology deserves a closer look. The word {T} names a precise idea, and learning it "
        "makes the rest of the topic easier to follow. {S} Specialists still debate the edges of "
        "the definition, which is part of what keeps the subject alive.",
        "Cultural practices grew up around {T} as well. {S} Communities in different places "
        "adapted the idea to their own needs, and those local versions tell us as much about the "
        "people as about {T} itself.",
        "A concrete case study helps. {S} When researchers followed {T} closely in a single "
        "setting, the abstract explanation turned into a sequence of events that anyone could "
        "retell, with causes, consequences and surprising turns.",
        "Key dates and events mark the turning points. {S} Each milestone involving {T} changed "
        "what later thinkers could take for granted and opened new lines of inquiry.",
        "An anecdote brings the idea home. {S} Stories like this one explain why {T} continues to "
        "capture the curiosity of students, teachers and researchers alike.",
    };

    std::vector<std::string> paragraphs;
    {
        std::string intro = "The lesson \"" + title + "\" opens the door to a much larger story.";
        for (std::size_t i = 0; i < std::min<std::size_t>(2, sentences.size()); ++i) intro += " " + sentences[i];
        intro += " This article digs deeper into the people, places and ideas behind it.";
        paragraphs.push_back(std::move(intro));
    }
    for (std::size_t i = 0; i < terms.size(); ++i) {
        std::string p = kFacets[i % std::size(kFacets)];
        const std::string sentence = sentence_with(terms[i]);
        for (auto pos = p.find("{S}"); pos != std::string::npos; pos = p.find("{S}")) p.replace(pos, 3, sentence);
        for (auto pos = p.find("{T}"); pos != std::string::npos; pos = p.find("{T}")) p.replace(pos, 3, terms[i]);
        // collapse the double space an empty sentence leaves behind
        for (auto pos = p.find("  "); pos != std::string::npos; pos = p.find("  ")) p.erase(pos, 1);
        paragraphs.push_back(std::move(p));
    }

    auto total_words = [&] {
        std::size_t n = 0;
        for (const auto& p : paragraphs) n += count_words(p);
        return n;
    };
    for (std::size_t cursor = 2; total_words() < min_words && !sentences.empty(); cursor += 3) {
        std::string p = "Looking again at the source material adds further detail.";
        for (std::size_t j = 0; j < 3; ++j) p += " " + sentences[(cursor + j) % sentences.size()];
        paragraphs.push_back(std::move(p));
        if (paragraphs.size() > 64) break;
    }
    paragraphs.push_back("Taken together, these threads show why " +
                         (title.empty() ? std::string("this topic") : title) +
                         " rewards a closer look, and they point toward related lessons that "
                         "continue the exploration.");
    while (total_words() > max_words && paragraphs.size() > 2) paragraphs.erase(paragraphs.end() - 2);
    std::string out;
    for (const auto& p : paragraphs) {
        if (!out.empty()) out += "\n\n";
        out += p;
    }
    if (count_words(out) > max_words) out = first_words(out, max_words);
    return out;
}

std::string rerank(const ChatRequest& r, MockFault fault) {
    if (faulted(fault, r)) return "Here are my judgments: {\"judgments\": [{\"candidate_id\": ";
    const std::string article = attr(r, "article");
    Json candidates = Json::parse(attr(r, "candidates"), nullptr, false);
    if (candidates.is_discarded() || !candidates.is_array()) return "I could not read the candidate list.";

    std::map<std::string, std::size_t> article_counts;
    for (const auto& t : tokenize(article)) ++article_counts[t];

    Json judgments = Json::array();
    for (const auto& c : candidates) {
        const std::string text = c.value("title", "") + " " + c.value("text", "");
        std::set<std::string> shared;
        for (const auto& t : tokenize(text)) {
            if (is_content_term(t, 5) && article_counts.count(t) && find_whole_word(article, t)) shared.insert(t);
        }
        std::vector<std::string> ranked(shared.begin(), shared.end());
        std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
            return article_counts[a] > article_counts[b];
        });
        if (ranked.size() > 3) ranked.resize(3);
        const auto overlap = shared.size();
        const int relevance = static_cast<int>(std::min<std::size_t>(10, overlap));
        const bool aligned = overlap >= 3;
        Json j;
        j["candidate_id"] = c.value("id", "");
        j["related_keywords"] = ranked;
        j["keyword_match"] = !ranked.empty();
        j["relevance"] = relevance;
        j["context_alignment"] = aligned;
        j["overall"] = std::min(10, relevance + (aligned ? 1 : 0));
        judgments.push_back(std::move(j));
    }
    Json out;
    out["judgments"] = std::move(judgments);
    return "```json\n" + out.dump() + "\n```";
}

std::string rewrite(const ChatRequest& r) {
    auto paragraphs = split_paragraphs(attr(r, "article"));
    Json recs = Json::parse(attr(r, "recommendations"), nullptr, false);
    if (recs.is_discarded() || !recs.is_array()) recs = Json::array();
    std::vector<std::string> appended;
    for (const auto& rec : recs) {
        const std::string keyword = rec.value("keyword", "");
        const std::string link = format_link(rec.value("title", ""), rec.value("url", ""));
        auto hit = std::find_if(paragraphs.begin(), paragraphs.end(), [&](const std::string& p) {
            return !keyword.empty() && find_whole_word(p, keyword).has_value();
        });
        if (hit != paragraphs.end()) {
            *hit += " To dig deeper into " + keyword + ", watch " + link + ".";
        } else {
            appended.push_back(capitalize(keyword.empty() ? std::string("This theme") : keyword) +
                               " is another thread worth following; watch " + link + " to explore it.");
        }
    }
    for (auto& p : appended) paragraphs.push_back(std::move(p));
    std::string out;
    for (const auto& p : paragraphs) {
        if (!out.empty()) out += "\n\n";
        out += p;
    }
    return out;
}

std::string judge(const ChatRequest& r, MockFault fault) {
    if (faulted(fault, r)) return "great essay!";
    std::string article = attr(r, "article");
    if (article.empty()) article = r.user;
    const auto paragraphs = split_paragraphs(article);
    const auto prose = strip_links(article);
    const auto words = count_words(prose);
    const auto sentences = std::max<std::size_t>(1, split_sentences(prose).size());
    const double avg_sentence = static_cast<double>(words) / static_cast<double>(sentences);
    int score = 2 + static_cast<int>(std::min<std::size_t>(paragraphs.size(), 4));
    if (!find_links(article).empty()) ++score;
    if (words >= 300) ++score;
    if (words >= 80 && avg_sentence >= 8.0 && avg_sentence <= 30.0) ++score;
    if (words < 50) score -= 2;
    return std::to_string(std::clamp(score, 1, 10));
}

}  // namespace

std::string MockChatBackend::send(const ChatRequest& request) {
    if (request.role == "summarizer") return summarize(request);
    if (request.role == "stage1_generator") return generate_article(request);
    if (request.role == "reranker") return rerank(request, options_.reranker_fault);
    if (request.role == "stage3_rewriter") return rewrite(request);
    if (request.role == "coherence_judge") return judge(request, options_.judge_fault);
    throw Error(ErrorCode::Backend, "mock backend has no behavior for role '" + request.role + "'");
}

}  // namespace digdeeper
