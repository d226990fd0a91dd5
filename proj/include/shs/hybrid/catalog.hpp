#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>

#include "shs/core/error.hpp"
#include "shs/core/rng.hpp"
#include "shs/core/vec.hpp"

namespace shs {

/// Index of a discrete mode within the mode list of its owning spec.
struct ModeId {
  int value = 0;
  friend constexpr bool operator==(ModeId, ModeId) = default;
  friend constexpr auto operator<=>(ModeId, ModeId) = default;
};

struct HybridState {
  ModeId mode;
  Vec position;
  friend bool operator==(const HybridState&, const HybridState&) = default;
};

// ---------------------------------------------------------------------------
// Vector fields

struct ConstantField {
  Vec c;
};

/// b(y) = A y + c
struct LinearField {
  Matrix a;
  Vec c;
};

/// b(y) = theta (mean - y)
struct OuDrift {
  double theta = 0.0;
  Vec mean;
};

class VectorField {
 public:
  using Variant = std::variant<ConstantField, LinearField, OuDrift>;

  VectorField() : v_(ConstantField{Vec{0.0}}) {}
  template <typename T>
    requires std::is_constructible_v<Variant, T>
  VectorField(T v) : v_(std::move(v)) {}  // NOLINT: implicit from any catalog entry

  static VectorField zero(std::size_t d) { return ConstantField{Vec(d, 0.0)}; }
  static VectorField constant(Vec c) { return ConstantField{std::move(c)}; }
  static VectorField linear(Matrix a, Vec c) { return LinearField{std::move(a), std::move(c)}; }
  static VectorField ou(double theta, Vec mean) { return OuDrift{theta, std::move(mean)}; }

  /// Pure decay b(y) = -k y on R^d.
  static VectorField decay(std::size_t d, double k) {
    Matrix a(d, Vec(d, 0.0));
    for (std::size_t p = 0; p < d; ++p) a[p][p] = -k;
    return LinearField{std::move(a), Vec(d, 0.0)};
  }

  const Variant& variant() const noexcept { return v_; }
  bool is_constant() const noexcept { return std::holds_alternative<ConstantField>(v_); }

  std::size_t dim() const {
    return std::visit(
        [](const auto& f) -> std::size_t {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantField>) return f.c.size();
          else if constexpr (std::is_same_v<T, LinearField>) return f.c.size();
          else return f.mean.size();
        },
        v_);
  }

  /// Problems with parameter shapes, empty when well formed.
  std::optional<std::string> check() const {
    if (const auto* l = std::get_if<LinearField>(&v_)) {
      if (l->a.size() != l->c.size()) return "linear field: A rows must match c";
      for (const auto& row : l->a)
        if (row.size() != l->c.size()) return "linear field: A must be square";
    }
    if (dim() == 0) return "vector field has dimension 0";
    return std::nullopt;
  }

  void eval_into(std::span<const double> y, std::span<double> out) const {
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantField>) {
            for (std::size_t p = 0; p < out.size(); ++p) out[p] = f.c[p];
          } else if constexpr (std::is_same_v<T, LinearField>) {
            for (std::size_t r = 0; r < out.size(); ++r) {
              double s = f.c[r];
              for (std::size_t c = 0; c < y.size(); ++c) s += f.a[r][c] * y[c];
              out[r] = s;
            }
          } else {
            for (std::size_t p = 0; p < out.size(); ++p) out[p] = f.theta * (f.mean[p] - y[p]);
          }
        },
        v_);
  }

  Vec operator()(std::span<const double> y) const {
    Vec out(y.size());
    eval_into(y, out);
    return out;
  }

 private:
  Variant v_;
};

// ---------------------------------------------------------------------------
// Diffusion coefficients

struct ZeroDiffusion {};

/// Constant d x m matrix sigma.
struct MatrixDiffusion {
  Matrix sigma;
};

class Diffusion {
 public:
  using Variant = std::variant<ZeroDiffusion, MatrixDiffusion>;

  Diffusion() = default;
  template <typename T>
    requires std::is_constructible_v<Variant, T>
  Diffusion(T v) : v_(std::move(v)) {}  // NOLINT: implicit from any catalog entry

  static Diffusion zero() { return ZeroDiffusion{}; }
  static Diffusion matrix(Matrix sigma) { return MatrixDiffusion{std::move(sigma)}; }
  /// sigma = s * I_d
  static Diffusion scalar(std::size_t d, double s) {
    Matrix m(d, Vec(d, 0.0));
    for (std::size_t p = 0; p < d; ++p) m[p][p] = s;
    return MatrixDiffusion{std::move(m)};
  }

  const Variant& variant() const noexcept { return v_; }
  bool is_zero() const noexcept { return std::holds_alternative<ZeroDiffusion>(v_); }

  /// Number of Wiener components driving the mode (at least one).
  std::size_t wiener_dim() const {
    if (const auto* m = std::get_if<MatrixDiffusion>(&v_))
      return m->sigma.empty() ? 1 : m->sigma.front().size();
    return 1;
  }

  std::optional<std::string> check(std::size_t d) const {
    if (const auto* m = std::get_if<MatrixDiffusion>(&v_)) {
      if (m->sigma.size() != d) return "diffusion matrix must have d rows";
      if (m->sigma.empty() || m->sigma.front().empty()) return "diffusion matrix needs m >= 1 columns";
      for (const auto& row : m->sigma)
        if (row.size() != m->sigma.front().size()) return "diffusion matrix rows differ in length";
    }
    return std::nullopt;
  }

  /// Adds sigma * scale * noise to `out`.
  void add_noise(std::span<const double> noise, double scale, std::span<double> out) const {
    if (const auto* m = std::get_if<MatrixDiffusion>(&v_)) {
      for (std::size_t r = 0; r < out.size(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < noise.size(); ++c) s += m->sigma[r][c] * noise[c];
        out[r] += s * scale;
      }
    }
  }

  /// Per-component variance rate (sigma sigma^T)_{pp}.
  double variance_rate(std::size_t p) const {
    if (const auto* m = std::get_if<MatrixDiffusion>(&v_)) {
      double s = 0.0;
      for (double x : m->sigma[p]) s += x * x;
      return s;
    }
    return 0.0;
  }

 private:
  Variant v_;
};

// ---------------------------------------------------------------------------
// Jump rates

struct ConstantRate {
  double lambda0 = 0.0;
};

/// lambda(y) = lambda0 + a * |y|
struct AffineNormRate {
  double lambda0 = 0.0;
  double a = 0.0;
};

class Rate {
 public:
  using Variant = std::variant<ConstantRate, AffineNormRate>;

  Rate() = default;
  Rate(Variant v, double bound) : v_(std::move(v)), bound_(bound) {}

  static Rate none() { return Rate(ConstantRate{0.0}, 0.0); }
  static Rate constant(double lambda) { return Rate(ConstantRate{lambda}, lambda); }
  static Rate affine_norm(double lambda0, double a, double bound) {
    return Rate(AffineNormRate{lambda0, a}, bound);
  }

  const Variant& variant() const noexcept { return v_; }
  /// Declared upper bound on the simulation domain.
  double bound() const noexcept { return bound_; }

  double operator()(std::span<const double> y) const {
    return std::visit(
        [&](const auto& r) -> double {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, ConstantRate>) return r.lambda0;
          else return r.lambda0 + r.a * norm2(y);
        },
        v_);
  }

  std::optional<std::string> check() const {
    if (!(bound_ >= 0.0)) return "rate bound must be non-negative";
    return std::visit(
        [&](const auto& r) -> std::optional<std::string> {
          using T = std::decay_t<decltype(r)>;
          if (r.lambda0 < 0.0) return "rate lambda0 must be non-negative";
          if constexpr (std::is_same_v<T, ConstantRate>) {
            if (r.lambda0 > bound_) return "constant rate exceeds its declared bound";
          } else {
            if (r.a < 0.0) return "affine rate slope must be non-negative";
          }
          return std::nullopt;
        },
        v_);
  }

 private:
  Variant v_ = ConstantRate{0.0};
  double bound_ = 0.0;
};

// ---------------------------------------------------------------------------
// Domains

/// Open box lo < y < hi; infinite bounds are allowed.
struct Box {
  Vec lo;
  Vec hi;

  static Box unbounded(std::size_t d) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {Vec(d, -inf), Vec(d, inf)};
  }

  std::size_t dim() const noexcept { return lo.size(); }

  bool contains(std::span<const double> y) const {
    for (std::size_t p = 0; p < y.size(); ++p)
      if (!(y[p] > lo[p] && y[p] < hi[p])) return false;
    return true;
  }

  bool empty() const {
    for (std::size_t p = 0; p < lo.size(); ++p)
      if (!(lo[p] < hi[p])) return true;
    return false;
  }

  bool bounded_below(std::size_t p) const { return std::isfinite(lo[p]); }
  bool bounded_above(std::size_t p) const { return std::isfinite(hi[p]); }
};

// ---------------------------------------------------------------------------
// Reset kernels

struct PointMass {
  HybridState target;
};

struct UniformBox {
  ModeId mode;
  Vec lo;
  Vec hi;
};

/// Gaussian restricted to the open box (lo, hi) by rejection.
struct ClippedGaussian {
  ModeId mode;
  Vec mean;
  Matrix covariance;
  Vec lo;
  Vec hi;
};

class ResetKernel {
 public:
  using Variant = std::variant<PointMass, UniformBox, ClippedGaussian>;

  static constexpr int kRejectionBudget = 100000;

  ResetKernel() : v_(PointMass{HybridState{ModeId{0}, Vec{0.0}}}) {}
  template <typename T>
    requires std::is_constructible_v<Variant, T>
  ResetKernel(T v) : v_(std::move(v)) {}  // NOLINT: implicit from any catalog entry

  static ResetKernel point(ModeId mode, Vec position) {
    return PointMass{HybridState{mode, std::move(position)}};
  }
  static ResetKernel uniform(ModeId mode, Vec lo, Vec hi) {
    return UniformBox{mode, std::move(lo), std::move(hi)};
  }
  static ResetKernel gaussian(ModeId mode, Vec mean, Matrix cov, Vec lo, Vec hi) {
    return ClippedGaussian{mode, std::move(mean), std::move(cov), std::move(lo), std::move(hi)};
  }

  const Variant& variant() const noexcept { return v_; }

  std::size_t dim() const {
    return std::visit(
        [](const auto& k) -> std::size_t {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, PointMass>) return k.target.position.size();
          else if constexpr (std::is_same_v<T, UniformBox>) return k.lo.size();
          else return k.mean.size();
        },
        v_);
  }

  ModeId mode() const {
    return std::visit(
        [](const auto& k) -> ModeId {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, PointMass>) return k.target.mode;
          else return k.mode;
        },
        v_);
  }

  /// Mean of the unclipped law; exact for point and uniform kernels.
  Vec nominal_mean() const {
    return std::visit(
        [](const auto& k) -> Vec {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, PointMass>) return k.target.position;
          else if constexpr (std::is_same_v<T, UniformBox>) return 0.5 * (k.lo + k.hi);
          else return k.mean;
        },
        v_);
  }

  std::optional<std::string> check() const {
    return std::visit(
        [](const auto& k) -> std::optional<std::string> {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, PointMass>) {
            if (k.target.position.empty()) return "point kernel has empty position";
          } else if constexpr (std::is_same_v<T, UniformBox>) {
            if (k.lo.size() != k.hi.size() || k.lo.empty()) return "uniform kernel bounds differ in dimension";
            for (std::size_t p = 0; p < k.lo.size(); ++p)
              if (!(k.lo[p] < k.hi[p]) || !std::isfinite(k.lo[p]) || !std::isfinite(k.hi[p]))
                return "uniform kernel needs finite lo < hi";
          } else {
            const std::size_t d = k.mean.size();
            if (d == 0 || k.lo.size() != d || k.hi.size() != d || k.covariance.size() != d)
              return "gaussian kernel dimensions disagree";
            for (const auto& row : k.covariance)
              if (row.size() != d) return "gaussian covariance must be square";
            for (std::size_t p = 0; p < d; ++p)
              if (!(k.lo[p] < k.hi[p])) return "gaussian clip box needs lo < hi";
            if (!cholesky(k.covariance)) return "gaussian covariance is not positive definite";
          }
          return std::nullopt;
        },
        v_);
  }

  /// Draws a post-jump state. `admissible` is an extra interiority predicate
  /// (typically the target mode's domain) applied by rejection.
  template <typename Admissible>
  HybridState sample(RandomStream& rng, Admissible&& admissible) const {
    return std::visit(
        [&](const auto& k) -> HybridState {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, PointMass>) {
            return k.target;
          } else if constexpr (std::is_same_v<T, UniformBox>) {
            for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
              Vec y(k.lo.size());
              for (std::size_t p = 0; p < y.size(); ++p)
                y[p] = k.lo[p] + (k.hi[p] - k.lo[p]) * rng.uniform_open();
              if (admissible(k.mode, y)) return HybridState{k.mode, std::move(y)};
            }
            throw SamplingFailure("uniform reset kernel: rejection budget exhausted");
          } else {
            const auto chol = *cholesky(k.covariance);
            const std::size_t d = k.mean.size();
            Vec noise(d);
            Box clip{k.lo, k.hi};
            for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
              for (auto& n : noise) n = rng.normal();
              Vec y = k.mean;
              for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c <= r; ++c) y[r] += chol[r][c] * noise[c];
              if (clip.contains(y) && admissible(k.mode, y)) return HybridState{k.mode, std::move(y)};
            }
            throw SamplingFailure("gaussian reset kernel: rejection budget exhausted");
          }
        },
        v_);
  }

  HybridState sample(RandomStream& rng) const {
    return sample(rng, [](ModeId, std::span<const double>) { return true; });
  }

  /// Lower Cholesky factor, or nullopt when not positive definite.
  static std::optional<Matrix> cholesky(const Matrix& a) {
    const std::size_t n = a.size();
    Matrix l(n, Vec(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = a[i][j];
        for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
        if (i == j) {
          if (!(s > 0.0)) return std::nullopt;
          l[i][i] = std::sqrt(s);
        } else {
          l[i][j] = s / l[j][j];
        }
      }
    }
    return l;
  }

 private:
  Variant v_;
};

}  // namespace shs
