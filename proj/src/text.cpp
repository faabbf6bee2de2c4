#include "mdraft/text.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace mdraft {

namespace {

// Advances over one UTF-8 sequence; malformed bytes decode as themselves.
char32_t next_codepoint(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char b0 = byte(i);
  auto cont = [&](std::size_t k) {
    return k < s.size() && (byte(k) & 0xC0u) == 0x80u;
  };
  if (b0 < 0x80u) {
    ++i;
    return b0;
  }
  if ((b0 & 0xE0u) == 0xC0u && cont(i + 1)) {
    const char32_t cp = ((b0 & 0x1Fu) << 6) | (byte(i + 1) & 0x3Fu);
    i += 2;
    return cp;
  }
  if ((b0 & 0xF0u) == 0xE0u && cont(i + 1) && cont(i + 2)) {
    const char32_t cp =
        ((b0 & 0x0Fu) << 12) | ((byte(i + 1) & 0x3Fu) << 6) | (byte(i + 2) & 0x3Fu);
    i += 3;
    return cp;
  }
  if ((b0 & 0xF8u) == 0xF0u && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
    const char32_t cp = ((b0 & 0x07u) << 18) | ((byte(i + 1) & 0x3Fu) << 12) |
                        ((byte(i + 2) & 0x3Fu) << 6) | (byte(i + 3) & 0x3Fu);
    i += 4;
    return cp;
  }
  ++i;
  return b0;
}

}  // namespace

bool is_space_codepoint(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

int word_count(std::string_view text) {
  int words = 0;
  bool in_word = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool space = is_space_codepoint(next_codepoint(text, i));
    if (space) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

std::string_view trim(std::string_view text) {
  std::size_t begin = 0;
  while (begin < text.size()) {
    std::size_t next = begin;
    if (!is_space_codepoint(next_codepoint(text, next))) break;
    begin = next;
  }
  // Scan forward tracking the end of the last non-space code point.
  std::size_t end = begin;
  std::size_t i = begin;
  while (i < text.size()) {
    std::size_t next = i;
    const bool space = is_space_codepoint(next_codepoint(text, next));
    if (!space) end = next;
    i = next;
  }
  return text.substr(begin, end - begin);
}

std::vector<std::string> lower_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = next_codepoint(text, i);
    if (is_space_codepoint(cp)) {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
    } else {
      for (std::size_t k = start; k < i; ++k) {
        current.push_back(static_cast<char>(
            std::tolower(static_cast<unsigned char>(text[k]))));
      }
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  const std::string_view t = trim(text);
  if (t.empty()) return std::nullopt;
  std::int64_t value = 0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

std::optional<std::int64_t> last_int_token(std::string_view text) {
  std::optional<std::int64_t> found;
  for (const std::string& tok : lower_tokens(text)) {
    if (auto v = parse_int(tok)) found = v;
  }
  return found;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace mdraft
