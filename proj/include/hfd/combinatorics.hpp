// Exact integer combinatorics used by the hierarchy coefficients.
#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "hfd/types.hpp"

namespace hfd {

inline constexpr int kMaxBinomialRow = 60;

namespace detail {
inline const auto& pascal_table() {
  static const auto table = [] {
    std::array<std::array<std::uint64_t, kMaxBinomialRow + 1>, kMaxBinomialRow + 1> t{};
    for (int n = 0; n <= kMaxBinomialRow; ++n) {
      t[n][0] = 1;
      for (int k = 1; k <= n; ++k) t[n][k] = t[n - 1][k - 1] + (k <= n - 1 ? t[n - 1][k] : 0);
    }
    return t;
  }();
  return table;
}
}  // namespace detail

/// C(n, k) exactly; zero outside 0 <= k <= n.
inline std::uint64_t binomial(int n, int k) {
  if (n < 0 || n > kMaxBinomialRow) throw InvalidArgument("binomial: n outside [0, 60]");
  if (k < 0 || k > n) return 0;
  return detail::pascal_table()[n][k];
}

/// n! / (n - k)! as an exact 128-bit product; exact for n <= 33.
inline unsigned __int128 falling_factorial(int n, int k) {
  if (k < 0 || k > n) throw InvalidArgument("falling_factorial: need 0 <= k <= n");
  unsigned __int128 p = 1;
  for (int i = n - k + 1; i <= n; ++i) p *= static_cast<unsigned __int128>(i);
  return p;
}

inline double falling_factorial_value(int n, int k) { return static_cast<double>(falling_factorial(n, k)); }

/// Reduced nonnegative fraction.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// C(p, l) C(n - p, n - k - l) / C(n, k), reduced; zero when any binomial vanishes.
inline Fraction sde_nonlinear_coefficient(int n, int k, int p, int l) {
  const std::uint64_t a = binomial(p, l);
  const std::uint64_t b = n - p >= 0 ? binomial(n - p, n - k - l) : 0;
  const std::uint64_t c = binomial(n, k);
  if (a == 0 || b == 0 || c == 0) return {0, 1};
  // reduce before multiplying to stay inside 64 bits
  std::uint64_t g1 = std::gcd(a, c);
  std::uint64_t num1 = a / g1, den = c / g1;
  std::uint64_t g2 = std::gcd(b, den);
  std::uint64_t num2 = b / g2;
  den /= g2;
  return {num1 * num2, den};
}

/// A choice of positions from a hierarchy tail: chosen and complement, both in
/// their original relative order.
struct SubsetSplit {
  std::vector<int> chosen;
  std::vector<int> rest;

  friend bool operator==(const SubsetSplit&, const SubsetSplit&) = default;
};

/// All C(k, i) ways to pick i elements (by position) out of `tail`.
inline std::vector<SubsetSplit> subset_terms(const std::vector<int>& tail, int i) {
  const int k = static_cast<int>(tail.size());
  if (i < 0 || i > k) throw InvalidArgument("subset_terms: need 0 <= i <= k");
  std::vector<SubsetSplit> out;
  std::vector<int> pos(i);
  std::iota(pos.begin(), pos.end(), 0);
  while (true) {
    SubsetSplit s;
    std::size_t next = 0;
    for (int idx = 0; idx < k; ++idx) {
      if (next < pos.size() && pos[next] == idx) {
        s.chosen.push_back(tail[idx]);
        ++next;
      } else {
        s.rest.push_back(tail[idx]);
      }
    }
    out.push_back(std::move(s));
    // advance the lexicographic combination
    int r = i - 1;
    while (r >= 0 && pos[r] == k - i + r) --r;
    if (r < 0) break;
    ++pos[r];
    for (int q = r + 1; q < i; ++q) pos[q] = pos[q - 1] + 1;
  }
  return out;
}

}  // namespace hfd
