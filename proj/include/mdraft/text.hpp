#ifndef MDRAFT_TEXT_HPP
#define MDRAFT_TEXT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mdraft {

// True for Unicode whitespace code points (word separators).
bool is_space_codepoint(char32_t cp);

// Number of maximal non-whitespace runs; splits on Unicode whitespace.
// Malformed UTF-8 bytes are treated as ordinary (non-space) characters.
int word_count(std::string_view text);

// Strips leading/trailing Unicode whitespace.
std::string_view trim(std::string_view text);

// Whitespace-separated tokens, ASCII-lowercased.
std::vector<std::string> lower_tokens(std::string_view text);

// Full-string signed decimal integer, surrounding whitespace allowed.
std::optional<std::int64_t> parse_int(std::string_view text);

// Last whitespace-separated token that parses as an integer.
std::optional<std::int64_t> last_int_token(std::string_view text);

// Shortest decimal form that round-trips exactly.
std::string format_double(double v);

}  // namespace mdraft

#endif  // MDRAFT_TEXT_HPP
