#pragma once

// Path tokenization of JSON documents.
//
// Every atomic component (anything that is neither an object nor an array)
// becomes one token: the dot-separated descent path from the root, followed
// by the rendered value, e.g. ".playerResources[1].Wood.2". In unordered mode
// list steps vanish from the path (".playerResources.Wood.2").

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "jsonbag/common.hpp"

namespace jsonbag {

/// Insertion-ordered so that token lists follow document order.
using JsonValue = nlohmann::ordered_json;
using Token = std::string;

enum class TokenizationMode { Ordered, Unordered, Both, Char };

inline std::string_view to_string(TokenizationMode mode) {
  switch (mode) {
    case TokenizationMode::Ordered: return "ordered";
    case TokenizationMode::Unordered: return "unordered";
    case TokenizationMode::Both: return "both";
    case TokenizationMode::Char: return "char";
  }
  return "?";
}

inline TokenizationMode parse_mode(std::string_view name) {
  if (name == "ordered") return TokenizationMode::Ordered;
  if (name == "unordered") return TokenizationMode::Unordered;
  if (name == "both") return TokenizationMode::Both;
  if (name == "char") return TokenizationMode::Char;
  throw Error("unknown tokenization mode '" + std::string(name) + "' (expected ordered|unordered|both|char)");
}

class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t offset) : Error(what), offset_(offset) {}
  /// Zero-based byte offset of the offending character.
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Strict RFC 8259 parse. Rejects trailing content, comments, NaN/Infinity.
inline JsonValue parse_json(std::string_view text) {
  try {
    return JsonValue::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/true,
                            /*ignore_comments=*/false);
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann counts the offending character 1-based.
    const std::size_t offset = e.byte == 0 ? 0 : e.byte - 1;
    throw ParseError("malformed JSON at byte " + std::to_string(offset) + ": " + e.what(), offset);
  }
}

/// Canonical compact rendering (no insignificant whitespace).
inline std::string compact(const JsonValue& doc) { return doc.dump(); }

/// Renders an atomic value as the final path segment.
inline std::string render_atomic(const JsonValue& v) {
  switch (v.type()) {
    case JsonValue::value_t::string: return v.get_ref<const std::string&>();
    case JsonValue::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case JsonValue::value_t::null: return "null";
    case JsonValue::value_t::number_integer: return std::to_string(v.get<std::int64_t>());
    case JsonValue::value_t::number_unsigned: return std::to_string(v.get<std::uint64_t>());
    case JsonValue::value_t::number_float: {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, v.get<double>());
      return std::string(buf, res.ptr);
    }
    default: throw Error("render_atomic called on a container");
  }
}

/// Object keys are joined with '.', so a literal dot inside a key is escaped.
inline std::string escape_key(std::string_view key) {
  std::string out;
  out.reserve(key.size());
  for (char c : key) {
    if (c == '.') out += '\\';
    out += c;
  }
  return out;
}

/// Drops tokens under excluded path prefixes. Matching is done on the
/// index-free form of both token and prefix, so ".players[2].wonder",
/// ".players[*].wonder" and ".players.wonder" are the same prefix and all
/// catch ordered as well as unordered renderings. A prefix only matches at a
/// segment boundary: ".grid" excludes ".grid.7" but not ".gridWidth.8".
class PathFilter {
public:
  PathFilter() = default;
  explicit PathFilter(std::vector<std::string> prefixes) {
    for (auto& p : prefixes) add(std::move(p));
  }

  void add(std::string prefix) {
    auto stripped = strip_indices(prefix);
    if (!stripped.empty()) prefixes_.push_back(std::move(stripped));
  }

  bool empty() const noexcept { return prefixes_.empty(); }
  const std::vector<std::string>& prefixes() const noexcept { return prefixes_; }

  /// `unordered_token` must already be index-free.
  bool excludes(std::string_view unordered_token) const {
    for (const auto& p : prefixes_) {
      if (unordered_token.size() < p.size() || unordered_token.compare(0, p.size(), p) != 0) continue;
      if (unordered_token.size() == p.size() || p.back() == '.' || unordered_token[p.size()] == '.') {
        return true;
      }
    }
    return false;
  }

  /// Removes "[n]" and "[*]" steps.
  static std::string strip_indices(std::string_view path) {
    std::string out;
    out.reserve(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (path[i] == '[') {
        std::size_t j = i + 1;
        while (j < path.size() && (path[j] == '*' || (path[j] >= '0' && path[j] <= '9'))) ++j;
        if (j < path.size() && path[j] == ']') {
          i = j;
          continue;
        }
      }
      out += path[i];
    }
    return out;
  }

private:
  std::vector<std::string> prefixes_;
};

namespace detail {

struct TokenWalker {
  TokenizationMode mode;
  const PathFilter& filter;
  std::vector<Token>& out;

  void walk(const JsonValue& v, std::string& ordered, std::string& unordered, bool via_list) {
    if (v.is_object()) {
      for (const auto& [key, child] : v.items()) {
        const auto seg = "." + escape_key(key);
        const auto ol = ordered.size();
        const auto ul = unordered.size();
        ordered += seg;
        unordered += seg;
        walk(child, ordered, unordered, via_list);
        ordered.resize(ol);
        unordered.resize(ul);
      }
      return;
    }
    if (v.is_array()) {
      std::size_t index = 0;
      for (const auto& child : v) {
        const auto ol = ordered.size();
        // A root-level list still yields a path starting with '.'.
        if (ordered.empty()) ordered += '.';
        ordered += '[';
        ordered += std::to_string(index++);
        ordered += ']';
        walk(child, ordered, unordered, true);
        ordered.resize(ol);
      }
      return;
    }
    const auto value = "." + render_atomic(v);
    auto unordered_token = unordered + value;
    if (filter.excludes(unordered_token)) return;
    switch (mode) {
      case TokenizationMode::Unordered:
        out.push_back(std::move(unordered_token));
        break;
      case TokenizationMode::Ordered:
        out.push_back(ordered + value);
        break;
      case TokenizationMode::Both:
        out.push_back(ordered + value);
        if (via_list) out.push_back(std::move(unordered_token));
        break;
      case TokenizationMode::Char:
        throw Error("char mode is handled by tokenize_chars");
    }
  }
};

}  // namespace detail

/// One token per atomic component (two for list-borne components in Both
/// mode), in document order.
inline std::vector<Token> tokenize(const JsonValue& doc, TokenizationMode mode, const PathFilter& filter = {}) {
  if (mode == TokenizationMode::Char) throw Error("tokenize: use tokenize_chars for char mode");
  std::vector<Token> out;
  std::string ordered;
  std::string unordered;
  detail::TokenWalker{mode, filter, out}.walk(doc, ordered, unordered, false);
  return out;
}

/// One token per character (UTF-8 code point) of the JSON text, skipping
/// whitespace outside string literals.
inline std::vector<Token> tokenize_chars(std::string_view text) {
  std::vector<Token> out;
  out.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, text.size() - i);
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    } else if (c == '"') {
      in_string = true;
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

inline std::vector<Token> tokenize_chars(const std::string& text) { return tokenize_chars(std::string_view(text)); }
inline std::vector<Token> tokenize_chars(const char* text) { return tokenize_chars(std::string_view(text)); }
inline std::vector<Token> tokenize_chars(const JsonValue& doc) { return tokenize_chars(compact(doc)); }

/// Concatenates per-state tokens. The time-ordered list of states is not a
/// game component, so it contributes no index step.
inline std::vector<Token> tokenize_trajectory(const std::vector<JsonValue>& states, TokenizationMode mode,
                                              const PathFilter& filter = {}) {
  if (states.empty()) throw Error("tokenize_trajectory: empty trajectory");
  std::vector<Token> out;
  for (const auto& s : states) {
    auto part = mode == TokenizationMode::Char ? tokenize_chars(s) : tokenize(s, mode, filter);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Reads game states from a `.jsonl` file (one state per non-blank line) or a
/// `.json` file (a single state).
inline std::vector<JsonValue> read_states(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  std::vector<JsonValue> states;
  if (path.extension() == ".jsonl") {
    std::size_t start = 0;
    std::size_t line_no = 1;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      std::string_view line(text.data() + start, end - start);
      if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
        try {
          states.push_back(parse_json(line));
        } catch (const ParseError& e) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what(), start + e.offset());
        }
      }
      start = end + 1;
      ++line_no;
    }
  } else {
    try {
      states.push_back(parse_json(text));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
  }
  return states;
}

/// Filter spec files hold a JSON array of path-prefix strings.
inline PathFilter read_filter(const std::filesystem::path& path) {
  const auto doc = parse_json(read_text_file(path));
  if (!doc.is_array()) throw Error(path.string() + ": filter spec must be a JSON array of strings");
  PathFilter filter;
  for (const auto& p : doc) {
    if (!p.is_string()) throw Error(path.string() + ": filter entries must be strings");
    filter.add(p.get<std::string>());
  }
  return filter;
}

}  // namespace jsonbag
