/*
 * Copyright 2026 The illume Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef ILLUME_COMMON_HPP
#define ILLUME_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace illume {

/// Shape disagreement between operands.
struct dimension_error : std::runtime_error {
  explicit dimension_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller broke a documented precondition.
struct contract_error : std::runtime_error {
  explicit contract_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Fidelity refinement found no training neighbor of the required class.
struct no_valid_neighbor_error : std::runtime_error {
  explicit no_valid_neighbor_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A ratio metric whose denominator is zero.
struct undefined_ratio_error : std::runtime_error {
  explicit undefined_ratio_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric guards used across the library, kept in one place.
namespace tol {
inline constexpr double kProbClamp = 1e-12;   // KL denominator floor
inline constexpr double kStdClamp = 1e-8;     // Pearson std floor
inline constexpr double kNormClamp = 1e-30;   // squared-norm floor inside cosine graphs
inline constexpr double kRowSum = 1e-9;       // neighbor-distribution row-sum check
}  // namespace tol

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Deterministic RNG: std::mt19937_64 engine (fully specified by the standard)
/// with hand-rolled distributions, so streams never depend on libstdc++
/// internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix(seed)) {}

  std::uint64_t next_u64() {
    // xorshift* keeps the implementation self-contained and reproducible.
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1DULL;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.empty()) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = uniform_index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

  /// Derive an independent stream; used for per-epoch / per-component seeding.
  Rng fork(std::uint64_t salt) const {
    return Rng(state_ ^ splitmix(salt ^ 0x9E3779B97F4A7C15ULL));
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    x = x ^ (x >> 31);
    return x == 0 ? 0x9E3779B97F4A7C15ULL : x;
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace illume

#endif  // ILLUME_COMMON_HPP
