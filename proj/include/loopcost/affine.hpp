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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace loopcost {

/// Integer affine expression `c0 + sum(coeff * var)`. Terms keep first-appearance
/// order so printing is stable; zero coefficients are dropped.
class AffineExpr {
 public:
  using Term = std::pair<std::string, int64_t>;

  AffineExpr() = default;
  explicit AffineExpr(int64_t constant) : constant_(constant) {}

  static AffineExpr Var(std::string name, int64_t coeff = 1);

  /// Parses text such as "4*i + j - 1" or "i*2". Throws Error on non-affine input
  /// (products of variables, division, unknown tokens).
  static AffineExpr Parse(std::string_view text);

  const std::vector<Term>& terms() const { return terms_; }
  int64_t constant() const { return constant_; }
  int64_t coeff(std::string_view var) const;
  bool uses(std::string_view var) const { return coeff(var) != 0; }

  void add_term(const std::string& var, int64_t coeff);
  void add_constant(int64_t c) { constant_ += c; }

  /// Replaces `var` by `replacement` (affine substitution).
  AffineExpr substitute(std::string_view var, const AffineExpr& replacement) const;

  /// Evaluates with a lookup callable `int64_t(std::string_view)`.
  template <typename Lookup>
  int64_t eval(Lookup&& value_of) const {
    int64_t v = constant_;
    for (const auto& [name, c] : terms_) v += c * value_of(name);
    return v;
  }

  std::string to_string() const;

  friend bool operator==(const AffineExpr& a, const AffineExpr& b);

 private:
  std::vector<Term> terms_;
  int64_t constant_ = 0;
};

bool is_identifier(std::string_view s);

}  // namespace loopcost
