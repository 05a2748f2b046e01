#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace digdeeper {

/// A link in article text: inline `[text](url)` markup or a bare http(s):// token.
struct LinkSpan {
    std::size_t begin = 0;  // byte offsets into the scanned text
    std::size_t end = 0;
    std::string text;  // empty for bare urls
    std::string url;
    bool inline_markup = false;
};

std::vector<LinkSpan> find_links(std::string_view text);

/// `text` with every link removed (inline markup and bare urls alike).
std::string strip_links(std::string_view text);

/// Paragraphs are separated by one or more blank lines.
std::vector<std::string> split_paragraphs(std::string_view text);

/// `[title](url)`.
std::string format_link(std::string_view title, std::string_view url);

/// Number of times `needle` occurs in `haystack` (non-overlapping).
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

/// ASCII case-insensitive equality.
bool iequals(std::string_view a, std::string_view b);

/// First case-insensitive whole-word occurrence of `keyword` at or after `from`.
/// A boundary is the text edge or a byte that is not an ASCII letter/digit and not part of
/// a multi-byte UTF-8 sequence. Matches inside link markup are skipped when `skip_links`.
std::optional<std::size_t> find_whole_word(std::string_view text, std::string_view keyword,
                                           bool skip_links = true);

}  // namespace digdeeper
