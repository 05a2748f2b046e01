#include "digdeeper/markup.hpp"

#include <algorithm>
#include <cctype>

namespace digdeeper {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

// Inline markup starting at text[pos] == '['. Link text may not span a blank line.
std::optional<LinkSpan> match_inline(std::string_view text, std::size_t pos) {
    const auto close = text.find(']', pos + 1);
    if (close == std::string_view::npos || close + 1 >= text.size() || text[close + 1] != '(') {
        return std::nullopt;
    }
    const auto label = text.substr(pos + 1, close - pos - 1);
    if (label.find('[') != std::string_view::npos || label.find("\n\n") != std::string_view::npos) {
        return std::nullopt;
    }
    const auto paren_close = text.find(')', close + 2);
    if (paren_close == std::string_view::npos) return std::nullopt;
    const auto url = text.substr(close + 2, paren_close - close - 2);
    if (url.empty() || std::any_of(url.begin(), url.end(), is_space)) return std::nullopt;
    LinkSpan span;
    span.begin = pos;
    span.end = paren_close + 1;
    span.text = std::string(label);
    span.url = std::string(url);
    span.inline_markup = true;
    return span;
}

bool starts_with_url(std::string_view text, std::size_t pos) {
    auto rest = text.substr(pos);
    return rest.substr(0, 7) == "http://" || rest.substr(0, 8) == "https://";
}

}  // namespace

std::vector<LinkSpan> find_links(std::string_view text) {
    std::vector<LinkSpan> links;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '[') {
            if (auto span = match_inline(text, i)) {
                i = span->end;
                links.push_back(std::move(*span));
                continue;
            }
        }
        if ((i == 0 || is_space(text[i - 1]) || text[i - 1] == '(' || text[i - 1] == '<') &&
            starts_with_url(text, i)) {
            std::size_t end = i;
            while (end < text.size() && !is_space(text[end]) && text[end] != '>' &&
                   text[end] != ')') {
                ++end;
            }
            // trailing sentence punctuation is not part of the url
            while (end > i && std::string_view(".,;:!?").find(text[end - 1]) != std::string_view::npos) {
                --end;
            }
            LinkSpan span;
            span.begin = i;
            span.end = end;
            span.url = std::string(text.substr(i, end - i));
            links.push_back(std::move(span));
            i = end;
            continue;
        }
        ++i;
    }
    return links;
}

std::string strip_links(std::string_view text) {
    std::string out;
    std::size_t cursor = 0;
    for (const auto& link : find_links(text)) {
        out.append(text.substr(cursor, link.begin - cursor));
        out.push_back(' ');
        cursor = link.end;
    }
    out.append(text.substr(cursor));
    return out;
}

std::vector<std::string> split_paragraphs(std::string_view text) {
    std::vector<std::string> paragraphs;
    std::string current;
    std::size_t pos = 0;
    auto flush = [&] {
        // trim
        auto b = current.find_first_not_of(" \t\r\n");
        if (b != std::string::npos) {
            auto e = current.find_last_not_of(" \t\r\n");
            paragraphs.push_back(current.substr(b, e - b + 1));
        }
        current.clear();
    };
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        const bool blank = std::all_of(line.begin(), line.end(), is_space);
        if (blank) {
            flush();
        } else {
            if (!current.empty()) current.push_back('\n');
            current.append(line);
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    flush();
    return paragraphs;
}

std::string format_link(std::string_view title, std::string_view url) {
    std::string out;
    out.reserve(title.size() + url.size() + 4);
    out.push_back('[');
    out.append(title);
    out.append("](");
    out.append(url);
    out.push_back(')');
    return out;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return 0;
    std::size_t count = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

std::optional<std::size_t> find_whole_word(std::string_view text, std::string_view keyword,
                                           bool skip_links) {
    if (keyword.empty() || keyword.size() > text.size()) return std::nullopt;
    const auto links = skip_links ? find_links(text) : std::vector<LinkSpan>{};
    const bool word_start = is_word_byte(static_cast<unsigned char>(keyword.front()));
    const bool word_end = is_word_byte(static_cast<unsigned char>(keyword.back()));
    for (std::size_t pos = 0; pos + keyword.size() <= text.size(); ++pos) {
        if (!iequals(text.substr(pos, keyword.size()), keyword)) continue;
        const std::size_t end = pos + keyword.size();
        if (word_start && pos > 0 && is_word_byte(static_cast<unsigned char>(text[pos - 1]))) continue;
        if (word_end && end < text.size() && is_word_byte(static_cast<unsigned char>(text[end]))) continue;
        const bool in_link = std::any_of(links.begin(), links.end(), [&](const LinkSpan& l) {
            return pos < l.end && end > l.begin;
        });
        if (in_link) continue;
        return pos;
    }
    return std::nullopt;
}

}  // namespace digdeeper
