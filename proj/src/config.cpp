/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "loopcost/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

#include "loopcost/error.hpp"

namespace loopcost::config {

namespace {

class LineParser {
 public:
  LineParser(std::string_view line, std::size_t line_no) : s_(line), line_(line_no) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, pos_ + 1); }

  std::string quoted() {
    const char q = s_[pos_++];
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != q) {
      char c = s_[pos_++];
      if (q == '"' && c == '\\' && pos_ < s_.size()) {
        char e = s_[pos_++];
        switch (e) {
          case 'n':
            out.push_back('\n');
            break;
          case 't':
            out.push_back('\t');
            break;
          case '"':
          case '\\':
            out.push_back(e);
            break;
          default:
            fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out.push_back(c);
      }
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::string key() {
    skip_ws();
    if (peek() == '"' || peek() == '\'') return quoted();
    std::string out;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '-')) {
      out.push_back(s_[pos_++]);
    }
    if (out.empty()) fail("expected a key");
    return out;
  }

  // Dotted table name: a.b."c.d"
  std::string table_name() {
    std::string name;
    for (;;) {
      std::string part = key();
      if (!name.empty()) name += '.';
      name += part;
      skip_ws();
      if (peek() != '.') break;
      ++pos_;
    }
    return name;
  }

  Value value() {
    skip_ws();
    const char c = peek();
    if (c == '"' || c == '\'') return quoted();
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != '#' && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char ch : tok) {
      if (ch != '_') digits.push_back(ch);
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
    if (!is_float) {
      int64_t v = 0;
      const char* b = digits.data();
      const char* e = digits.data() + digits.size();
      if (*b == '+') ++b;
      auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec == std::errc() && ptr == e) return v;
      pos_ = start;
      fail("invalid value '" + tok + "'");
    }
    char* end = nullptr;
    const double d = std::strtod(digits.c_str(), &end);
    if (end != digits.c_str() + digits.size()) {
      pos_ = start;
      fail("invalid number '" + tok + "'");
    }
    return d;
  }

  std::size_t pos_ = 0;

 private:
  std::string_view s_;
  std::size_t line_;
};

const char* type_name(const Value& v) {
  switch (v.index()) {
    case 0:
      return "boolean";
    case 1:
      return "integer";
    case 2:
      return "float";
    default:
      return "string";
  }
}

}  // namespace

Document Document::Parse(std::string_view text) {
  Document doc;
  doc.sections_.push_back({"", {}});
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    LineParser p(line, line_no);
    if (p.at_end_or_comment()) {
      if (end == text.size()) break;
      continue;
    }
    if (p.peek() == '[') {
      ++p.pos_;
      if (p.peek() == '[') p.fail("arrays of tables are not supported");
      std::string name = p.table_name();
      p.skip_ws();
      if (p.peek() != ']') p.fail("expected ']'");
      ++p.pos_;
      if (!p.at_end_or_comment()) p.fail("unexpected text after table header");
      if (doc.find(name) != nullptr) p.fail("duplicate table [" + name + "]");
      doc.sections_.push_back({name, {}});
    } else {
      std::string k = p.key();
      p.skip_ws();
      if (p.peek() != '=') p.fail("expected '='");
      ++p.pos_;
      Value v = p.value();
      if (!p.at_end_or_comment()) p.fail("unexpected text after value");
      auto& entries = doc.sections_.back().entries;
      for (const auto& [ek, ev] : entries) {
        if (ek == k) p.fail("duplicate key '" + k + "'");
      }
      entries.emplace_back(k, std::move(v));
    }
    if (end == text.size()) break;
  }
  return doc;
}

const Document::Section* Document::find(std::string_view section) const {
  for (const auto& s : sections_) {
    if (s.name == section) return &s;
  }
  return nullptr;
}

bool Document::has_section(std::string_view section) const { return find(section) != nullptr; }

std::vector<std::string> Document::keys(std::string_view section) const {
  std::vector<std::string> out;
  if (const Section* s = find(section)) {
    for (const auto& [k, v] : s->entries) out.push_back(k);
  }
  return out;
}

bool Document::has(std::string_view section, std::string_view key) const {
  const Section* s = find(section);
  if (s == nullptr) return false;
  for (const auto& [k, v] : s->entries) {
    if (k == key) return true;
  }
  return false;
}

const Value& Document::get(std::string_view section, std::string_view key) const {
  if (const Section* s = find(section)) {
    for (const auto& [k, v] : s->entries) {
      if (k == key) return v;
    }
  }
  throw Error("missing config key [" + std::string(section) + "] " + std::string(key));
}

int64_t Document::get_int(std::string_view section, std::string_view key) const {
  const Value& v = get(section, key);
  if (const auto* i = std::get_if<int64_t>(&v)) return *i;
  throw Error("config key [" + std::string(section) + "] " + std::string(key) + " must be an integer, got " +
              type_name(v));
}

double Document::get_number(std::string_view section, std::string_view key) const {
  const Value& v = get(section, key);
  if (const auto* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw Error("config key [" + std::string(section) + "] " + std::string(key) + " must be a number, got " +
              type_name(v));
}

std::string Document::get_string(std::string_view section, std::string_view key) const {
  const Value& v = get(section, key);
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw Error("config key [" + std::string(section) + "] " + std::string(key) + " must be a string, got " +
              type_name(v));
}

bool Document::get_bool(std::string_view section, std::string_view key) const {
  const Value& v = get(section, key);
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw Error("config key [" + std::string(section) + "] " + std::string(key) + " must be a boolean, got " +
              type_name(v));
}

int64_t Document::get_int(std::string_view section, std::string_view key, int64_t fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

double Document::get_number(std::string_view section, std::string_view key, double fallback) const {
  return has(section, key) ? get_number(section, key) : fallback;
}

bool Document::get_bool(std::string_view section, std::string_view key, bool fallback) const {
  return has(section, key) ? get_bool(section, key) : fallback;
}

}  // namespace loopcost::config
