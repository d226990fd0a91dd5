#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <boost/container/small_vector.hpp>

#include "shs/core/error.hpp"

namespace shs {

/// Real vector. Short ones (d <= 2, the common case) are stored inline, which
/// keeps per-agent state compact for very large collectives.
class Vec : public boost::container::small_vector<double, 2> {
  using Base = boost::container::small_vector<double, 2>;

 public:
  using Base::Base;
  Vec() = default;
  Vec(std::initializer_list<double> il) : Base(il) {}
  explicit Vec(std::span<const double> s) : Base(s.begin(), s.end()) {}

  operator std::span<double>() noexcept { return {data(), size()}; }
  operator std::span<const double>() const noexcept { return {data(), size()}; }

  friend bool operator==(const Vec& a, const Vec& b) {
    return static_cast<const Base&>(a) == static_cast<const Base&>(b);
  }
};
using Matrix = std::vector<Vec>;  // row-major, rows of equal length

inline void require_dim(std::span<const double> v, std::size_t d, const char* what) {
  if (v.size() != d) {
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(d) +
                            ", got " + std::to_string(v.size()));
  }
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline Vec operator+(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = a[p] + b[p];
  return out;
}

inline Vec operator-(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = a[p] - b[p];
  return out;
}

inline Vec operator*(double s, const Vec& a) {
  Vec out(a.size());
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = s * a[p];
  return out;
}

inline Vec mat_vec(const Matrix& m, std::span<const double> v) {
  Vec out(m.size(), 0.0);
  for (std::size_t r = 0; r < m.size(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < v.size(); ++c) s += m[r][c] * v[c];
    out[r] = s;
  }
  return out;
}

/// Distance from a state to its guard, `guard - state - input`, rounded once.
///
/// The two arrangements `guard - (state + input)` and `(guard - input) - state`
/// describe the same crossing. Both functions return the correctly rounded
/// value of the exact three-term difference, so they agree bit for bit. When
/// one of the pairwise sums is exact a single double operation gives that
/// value; otherwise the difference is formed in binary128, which is exact for
/// operands within 60 binary orders of each other.
namespace gap_detail {

// Knuth's TwoSum: a + b == s + err exactly.
inline double two_sum(double a, double b, double& err) {
  const double s = a + b;
  const double bb = s - a;
  err = (a - (s - bb)) + (b - bb);
  return s;
}

inline double wide(double guard, double state, double input) {
  const __float128 s = static_cast<__float128>(state) + static_cast<__float128>(input);
  return static_cast<double>(static_cast<__float128>(guard) - s);
}

}  // namespace gap_detail

inline double guard_gap_coupled(double guard, double state, double input) {
  double e = 0.0;
  const double s = gap_detail::two_sum(state, input, e);
  if (e == 0.0) return guard - s;
  const double g = gap_detail::two_sum(guard, -input, e);
  if (e == 0.0) return g - state;
  return gap_detail::wide(guard, state, input);
}

inline double guard_gap_modified(double guard, double state, double input) {
  double e = 0.0;
  const double g = gap_detail::two_sum(guard, -input, e);
  if (e == 0.0) return g - state;
  const double s = gap_detail::two_sum(state, input, e);
  if (e == 0.0) return guard - s;
  return gap_detail::wide(guard, state, input);
}

}  // namespace shs
