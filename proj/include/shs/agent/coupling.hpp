#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "shs/core/error.hpp"
#include "shs/core/vec.hpp"

namespace shs {

/// w^{to,from}: effect of `from`'s jumps on `to`'s coordination dynamics.
struct CouplingEdge {
  std::size_t to = 0;
  std::size_t from = 0;
  Vec weight;
  friend bool operator==(const CouplingEdge&, const CouplingEdge&) = default;
};

/// Sparse coupling table. Only entries with |w| >= threshold are retained in
/// the adjacency lists; sub-threshold entries can never enter a neighborhood.
class CouplingSpec {
 public:
  struct InEdge {
    std::size_t from;
    Vec weight;
  };

  CouplingSpec() = default;
  CouplingSpec(std::size_t n, std::size_t d, double threshold, std::vector<CouplingEdge> edges = {})
      : n_(n), d_(d), threshold_(threshold), edges_(std::move(edges)) {
    rebuild();
  }

  static CouplingSpec none(std::size_t n, std::size_t d, double threshold = 1.0) {
    return CouplingSpec(n, d, threshold);
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  double threshold() const noexcept { return threshold_; }
  /// All declared entries, including inert sub-threshold ones.
  const std::vector<CouplingEdge>& edges() const noexcept { return edges_; }

  const std::vector<InEdge>& incoming(std::size_t i) const { return in_.at(i); }
  /// Agents announced when `j` jumps.
  const std::vector<std::size_t>& receivers(std::size_t j) const { return out_.at(j); }

  bool strong(const Vec& w) const { return norm2(w) >= threshold_; }

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (!(threshold_ > 0.0)) out.emplace_back("coupling threshold must be strictly positive");
    for (const auto& e : edges_) {
      const std::string tag = "coupling entry (" + std::to_string(e.to) + "," + std::to_string(e.from) + "): ";
      if (e.to >= n_ || e.from >= n_) out.push_back(tag + "unknown agent");
      if (e.weight.size() != d_) out.push_back(tag + "weight dimension differs from d");
      if (e.to == e.from && norm2(e.weight) != 0.0) out.push_back(tag + "self-coupling must be zero");
      if (!all_finite(e.weight)) out.push_back(tag + "weight is not finite");
    }
    return out;
  }

 private:
  void rebuild() {
    in_.assign(n_, {});
    out_.assign(n_, {});
    for (const auto& e : edges_) {
      if (e.to >= n_ || e.from >= n_ || e.to == e.from || e.weight.size() != d_) continue;
      if (!strong(e.weight)) continue;
      in_[e.to].push_back({e.from, e.weight});
      out_[e.from].push_back(e.to);
    }
    for (auto& v : in_)
      std::stable_sort(v.begin(), v.end(), [](const InEdge& a, const InEdge& b) { return a.from < b.from; });
    for (auto& v : out_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  std::size_t n_ = 0;
  std::size_t d_ = 1;
  double threshold_ = 1.0;
  std::vector<CouplingEdge> edges_;
  std::vector<std::vector<InEdge>> in_;
  std::vector<std::vector<std::size_t>> out_;
};

/// N^i = { j : |w^{ij}| >= threshold, clock_j <= clock_i }
inline std::vector<std::size_t> neighborhood(std::size_t i, const CouplingSpec& coupling,
                                             std::span<const double> clocks) {
  if (i >= coupling.size() || clocks.size() != coupling.size())
    throw UnknownAgent("neighborhood: unknown agent " + std::to_string(i));
  std::vector<std::size_t> out;
  for (const auto& e : coupling.incoming(i))
    if (clocks[e.from] <= clocks[i]) out.push_back(e.from);
  return out;
}

/// I^i = sum_{j in N^i} w^{ij} exp(-k_i clock_j)
inline Vec coupling_input(std::size_t i, const CouplingSpec& coupling, double k_i,
                          std::span<const double> clocks) {
  if (i >= coupling.size() || clocks.size() != coupling.size())
    throw UnknownAgent("coupling_input: unknown agent " + std::to_string(i));
  Vec out(coupling.dim(), 0.0);
  for (const auto& e : coupling.incoming(i)) {
    if (!(clocks[e.from] <= clocks[i])) continue;
    const double decay = std::exp(-k_i * clocks[e.from]);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += e.weight[p] * decay;
  }
  return out;
}

/// z~ = z + I
inline Vec effective_position(std::span<const double> z, std::span<const double> input) {
  require_dim(input, z.size(), "effective_position");
  Vec out(z.size());
  for (std::size_t p = 0; p < z.size(); ++p) out[p] = z[p] + input[p];
  return out;
}

/// beta_bar = beta - I
inline Vec modified_guard(std::span<const double> beta, std::span<const double> input) {
  require_dim(input, beta.size(), "modified_guard");
  Vec out(beta.size());
  for (std::size_t p = 0; p < beta.size(); ++p) out[p] = beta[p] - input[p];
  return out;
}

}  // namespace shs
