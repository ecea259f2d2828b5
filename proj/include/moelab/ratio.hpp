// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <numeric>
#include <ostream>

namespace moelab {

/// Non-negative exact fraction. Comparisons cross-multiply in 128 bits, so
/// any numerator/denominator that fits in 64 bits compares exactly.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  constexpr double value() const noexcept {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  }

  constexpr Ratio reduced() const noexcept {
    if (den == 0) return *this;
    const auto g = std::gcd(num, den);
    return g == 0 ? Ratio{0, 1} : Ratio{num / g, den / g};
  }

  friend constexpr std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) noexcept {
    using wide = unsigned __int128;
    const wide lhs = static_cast<wide>(a.num) * b.den;
    const wide rhs = static_cast<wide>(b.num) * a.den;
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  friend constexpr bool operator==(const Ratio& a, const Ratio& b) noexcept {
    return (a <=> b) == std::strong_ordering::equal;
  }

  friend std::ostream& operator<<(std::ostream& os, const Ratio& r) {
    return os << r.num << '/' << r.den;
  }
};

}  // namespace moelab
