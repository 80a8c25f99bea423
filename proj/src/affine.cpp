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

#include "loopcost/affine.hpp"

#include <algorithm>
#include <cctype>

#include "loopcost/error.hpp"

namespace loopcost {

namespace {

class AffineParser {
 public:
  explicit AffineParser(std::string_view text) : text_(text) {}

  AffineExpr parse() {
    AffineExpr e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error("index expression \"" + std::string(text_) + "\": " + msg + " at column " +
                std::to_string(pos_ + 1));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  AffineExpr parse_sum() {
    AffineExpr acc;
    bool negate = false;
    if (accept('-')) {
      negate = true;
    } else {
      accept('+');
    }
    acc = scaled(parse_product(), negate ? -1 : 1);
    for (;;) {
      if (accept('+')) {
        acc = add(acc, parse_product());
      } else if (accept('-')) {
        acc = add(acc, scaled(parse_product(), -1));
      } else {
        return acc;
      }
    }
  }

  AffineExpr parse_product() {
    AffineExpr acc = parse_factor();
    while (accept('*')) {
      AffineExpr rhs = parse_factor();
      if (acc.terms().empty()) {
        acc = scaled(rhs, acc.constant());
      } else if (rhs.terms().empty()) {
        acc = scaled(acc, rhs.constant());
      } else {
        fail("product of index variables is not affine");
      }
    }
    skip_space();
    if (pos_ < text_.size() && (text_[pos_] == '/' || text_[pos_] == '%')) {
      fail("division and modulo are not affine");
    }
    return acc;
  }

  AffineExpr parse_factor() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      AffineExpr e = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (c == '-') {
      ++pos_;
      return scaled(parse_factor(), -1);
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      int64_t v = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        v = v * 10 + (text_[pos_] - '0');
        ++pos_;
      }
      return AffineExpr(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      return AffineExpr::Var(std::string(text_.substr(start, pos_ - start)));
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  static AffineExpr scaled(const AffineExpr& e, int64_t k) {
    AffineExpr out(e.constant() * k);
    for (const auto& [v, c] : e.terms()) out.add_term(v, c * k);
    return out;
  }

  static AffineExpr add(const AffineExpr& a, const AffineExpr& b) {
    AffineExpr out = a;
    out.add_constant(b.constant());
    for (const auto& [v, c] : b.terms()) out.add_term(v, c);
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

AffineExpr AffineExpr::Var(std::string name, int64_t coeff) {
  AffineExpr e;
  e.add_term(name, coeff);
  return e;
}

AffineExpr AffineExpr::Parse(std::string_view text) { return AffineParser(text).parse(); }

int64_t AffineExpr::coeff(std::string_view var) const {
  for (const auto& [name, c] : terms_) {
    if (name == var) return c;
  }
  return 0;
}

void AffineExpr::add_term(const std::string& var, int64_t coeff) {
  auto it = std::find_if(terms_.begin(), terms_.end(), [&](const Term& t) { return t.first == var; });
  if (it == terms_.end()) {
    if (coeff != 0) terms_.emplace_back(var, coeff);
    return;
  }
  it->second += coeff;
  if (it->second == 0) terms_.erase(it);
}

AffineExpr AffineExpr::substitute(std::string_view var, const AffineExpr& replacement) const {
  AffineExpr out(constant_);
  for (const auto& [name, c] : terms_) {
    if (name == var) {
      out.add_constant(c * replacement.constant());
      for (const auto& [rn, rc] : replacement.terms()) out.add_term(rn, c * rc);
    } else {
      out.add_term(name, c);
    }
  }
  return out;
}

std::string AffineExpr::to_string() const {
  std::string s;
  for (const auto& [name, c] : terms_) {
    int64_t mag = c < 0 ? -c : c;
    if (s.empty()) {
      if (c < 0) s += "-";
    } else {
      s += c < 0 ? " - " : " + ";
    }
    if (mag != 1) s += std::to_string(mag) + "*";
    s += name;
  }
  if (s.empty()) return std::to_string(constant_);
  if (constant_ > 0) s += " + " + std::to_string(constant_);
  if (constant_ < 0) s += " - " + std::to_string(-constant_);
  return s;
}

bool operator==(const AffineExpr& a, const AffineExpr& b) {
  if (a.constant_ != b.constant_ || a.terms_.size() != b.terms_.size()) return false;
  return std::all_of(a.terms_.begin(), a.terms_.end(), [&](const AffineExpr::Term& t) { return b.coeff(t.first) == t.second; });
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

}  // namespace loopcost
