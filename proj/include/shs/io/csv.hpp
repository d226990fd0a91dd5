#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "shs/analysis/first_passage.hpp"
#include "shs/analysis/intensity.hpp"
#include "shs/analysis/kolmogorov.hpp"
#include "shs/core/error.hpp"
#include "shs/swarm/abstraction.hpp"
#include "shs/swarm/simulate.hpp"

namespace shs::io {

/// Shortest decimal that reads back to the same double.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, r.ptr};
}

inline std::string fmt(std::uint64_t x) { return std::to_string(x); }

inline double parse_double(std::string_view s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw CorruptInput(where + ": bad number '" + std::string(s) + "'");
  return x;
}

inline std::uint64_t parse_uint(std::string_view s, const std::string& where) {
  std::uint64_t x = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw CorruptInput(where + ": bad integer '" + std::string(s) + "'");
  return x;
}

namespace csv_detail {

inline void row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (c) out << ',';
    out << cells[c];
  }
  out << '\n';
}

inline void append(std::vector<std::string>& cells, std::span<const double> v) {
  for (double x : v) cells.push_back(fmt(x));
}

inline void names(std::vector<std::string>& cells, const std::string& stem, std::size_t d) {
  for (std::size_t p = 0; p < d; ++p) cells.push_back(stem + std::to_string(p + 1));
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string> lines(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(std::move(line));
  }
  return out;
}

inline std::string recipients(const SwarmTrace& tr, const SwarmJump& j) {
  std::string out;
  for (std::size_t r = 0; r < j.recipients.size(); ++r) {
    if (r) out += ';';
    out += std::to_string(tr.ids[j.recipients[r]]);
  }
  return out;
}

}  // namespace csv_detail

inline std::vector<std::string> trace_header(std::size_t d) {
  std::vector<std::string> h{"t", "agent", "q"};
  csv_detail::names(h, "z", d);
  csv_detail::names(h, "z_tilde", d);
  csv_detail::names(h, "beta", d);
  h.emplace_back("upsilon");
  return h;
}

/// One row per sample and agent: t, agent, q, z, z_tilde, beta, upsilon.
inline void write_trace_csv(std::ostream& out, const SwarmTrace& tr) {
  csv_detail::row(out, trace_header(tr.d));
  std::vector<std::string> cells;
  for (std::size_t m = 0; m < tr.samples(); ++m)
    for (std::size_t i = 0; i < tr.n; ++i) {
      cells.clear();
      cells.push_back(fmt(tr.times[m]));
      cells.push_back(fmt(tr.ids[i]));
      cells.push_back(std::to_string(tr.mode_at(m, i)));
      csv_detail::append(cells, tr.z_at(m, i));
      csv_detail::append(cells, tr.z_tilde_at(m, i));
      csv_detail::append(cells, tr.beta_at(m, i));
      cells.push_back(fmt(tr.upsilon_at(m, i)));
      csv_detail::row(out, cells);
    }
}

inline std::vector<std::string> jumps_header(std::size_t d) {
  std::vector<std::string> h{"t", "agent", "component", "pre_q"};
  csv_detail::names(h, "pre_z", d);
  csv_detail::names(h, "pre_z_tilde", d);
  csv_detail::names(h, "pre_beta", d);
  h.emplace_back("post_q");
  csv_detail::names(h, "post_z", d);
  csv_detail::names(h, "post_gamma", d);
  h.emplace_back("recipients");
  return h;
}

/// Jump log; components are 1-based and recipients are ';'-separated ids.
inline void write_jumps_csv(std::ostream& out, const SwarmTrace& tr) {
  csv_detail::row(out, jumps_header(tr.d));
  std::vector<std::string> cells;
  for (const auto& j : tr.jumps) {
    cells.clear();
    cells.push_back(fmt(j.time));
    cells.push_back(fmt(j.agent_id));
    cells.push_back(std::to_string(j.component + 1));
    cells.push_back(std::to_string(j.pre_mode.value));
    csv_detail::append(cells, j.pre_z);
    csv_detail::append(cells, j.pre_z_tilde);
    csv_detail::append(cells, j.pre_beta);
    cells.push_back(std::to_string(j.post_mode.value));
    csv_detail::append(cells, j.post_z);
    csv_detail::append(cells, j.post_gamma);
    cells.push_back(csv_detail::recipients(tr, j));
    csv_detail::row(out, cells);
  }
}

/// Reads a trace and its jump log back. Agent order follows first appearance.
inline SwarmTrace read_trace_csv(std::istream& trace, std::istream& jumps) {
  using csv_detail::split;
  SwarmTrace tr;
  const auto rows = csv_detail::lines(trace);
  if (rows.empty()) throw CorruptInput("trace: empty file");
  const auto head = split(rows[0]);
  if (head.size() < 7 || (head.size() - 4) % 3 != 0) throw CorruptInput("trace: unexpected header");
  const std::size_t d = (head.size() - 4) / 3;
  {
    const auto want = trace_header(d);
    for (std::size_t c = 0; c < want.size(); ++c)
      if (head[c] != want[c]) throw CorruptInput("trace: unexpected column '" + std::string(head[c]) + "'");
  }
  tr.d = d;
  std::map<std::uint64_t, std::size_t> index;
  // The first sample is the run of rows sharing the first time stamp.
  std::vector<std::vector<std::string_view>> cells;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    cells.push_back(split(rows[r]));
    if (cells.back().size() != head.size())
      throw CorruptInput("trace line " + std::to_string(r + 1) + ": wrong number of columns");
  }
  if (cells.empty()) throw CorruptInput("trace: no samples");
  while (tr.n < cells.size() && cells[tr.n][0] == cells[0][0]) ++tr.n;
  if (cells.size() % tr.n != 0) throw CorruptInput("trace: incomplete final sample");
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const std::string where = "trace line " + std::to_string(r + 2);
    const auto& c = cells[r];
    const std::size_t m = r / tr.n, i = r % tr.n;
    const double t = parse_double(c[0], where);
    const auto id = parse_uint(c[1], where);
    if (i == 0) {
      tr.times.push_back(t);
    } else if (t != tr.times.back()) {
      throw CorruptInput(where + ": time differs within a sample");
    }
    if (m == 0) {
      if (!index.emplace(id, i).second) throw CorruptInput(where + ": duplicate agent in a sample");
      tr.ids.push_back(id);
    } else if (tr.ids[i] != id) {
      throw CorruptInput(where + ": agents out of order");
    }
    tr.mode.push_back(static_cast<int>(parse_uint(c[2], where)));
    for (std::size_t p = 0; p < d; ++p) tr.z.push_back(parse_double(c[3 + p], where));
    for (std::size_t p = 0; p < d; ++p) tr.z_tilde.push_back(parse_double(c[3 + d + p], where));
    for (std::size_t p = 0; p < d; ++p) tr.beta.push_back(parse_double(c[3 + 2 * d + p], where));
    tr.upsilon.push_back(parse_double(c[3 + 3 * d], where));
  }

  const auto jrows = csv_detail::lines(jumps);
  if (jrows.empty()) throw CorruptInput("jumps: empty file");
  const auto want = jumps_header(d);
  const auto jhead = split(jrows[0]);
  if (jhead.size() != want.size()) throw CorruptInput("jumps: header does not match the trace dimension");
  for (std::size_t r = 1; r < jrows.size(); ++r) {
    const std::string where = "jumps line " + std::to_string(r + 1);
    const auto c = split(jrows[r]);
    if (c.size() != want.size()) throw CorruptInput(where + ": wrong number of columns");
    SwarmJump j;
    std::size_t k = 0;
    j.time = parse_double(c[k++], where);
    j.agent_id = parse_uint(c[k++], where);
    const auto it = index.find(j.agent_id);
    if (it == index.end()) throw CorruptInput(where + ": unknown agent " + std::to_string(j.agent_id));
    j.agent = it->second;
    const auto comp = parse_uint(c[k++], where);
    if (comp < 1 || comp > d) throw CorruptInput(where + ": component out of range");
    j.component = comp - 1;
    j.pre_mode = ModeId{static_cast<int>(parse_uint(c[k++], where))};
    auto take = [&](Vec& v) {
      for (std::size_t p = 0; p < d; ++p) v.push_back(parse_double(c[k++], where));
    };
    take(j.pre_z);
    take(j.pre_z_tilde);
    take(j.pre_beta);
    j.post_mode = ModeId{static_cast<int>(parse_uint(c[k++], where))};
    take(j.post_z);
    take(j.post_gamma);
    if (!c[k].empty())
      for (auto s : split(c[k], ';')) {
        const auto rit = index.find(parse_uint(s, where));
        if (rit == index.end()) throw CorruptInput(where + ": unknown recipient");
        j.recipients.push_back(rit->second);
      }
    tr.jumps.push_back(std::move(j));
  }
  return tr;
}

/// Long format: t, agent, beta..., tau.
inline void write_abstraction_csv(std::ostream& out, const AbstractionTrace& abs, std::span<const std::uint64_t> ids) {
  std::vector<std::string> cells{"t", "agent"};
  csv_detail::names(cells, "beta", abs.d);
  cells.emplace_back("tau");
  csv_detail::row(out, cells);
  for (std::size_t m = 0; m < abs.samples(); ++m)
    for (std::size_t i = 0; i < abs.n; ++i) {
      cells.clear();
      cells.push_back(fmt(abs.times[m]));
      cells.push_back(fmt(ids[i]));
      csv_detail::append(cells, abs.beta(m, i));
      cells.push_back(fmt(abs.tau(m, i)));
      csv_detail::row(out, cells);
    }
}

/// Per bin: lower and upper edge, density, CDF at the upper edge.
inline void write_first_passage_csv(std::ostream& out, const FirstPassageEstimate& est) {
  csv_detail::row(out, {"t_lo", "t_hi", "density", "density_se", "cdf", "cdf_se"});
  for (std::size_t m = 0; m + 1 < est.grid.size(); ++m)
    csv_detail::row(out, {fmt(est.grid[m]), fmt(est.grid[m + 1]), fmt(est.density[m]), fmt(est.density_se[m]),
                          fmt(est.cdf[m + 1]), fmt(est.cdf_se[m + 1])});
}

/// End points have no central difference; those cells are left empty.
inline void write_forward_csv(std::ostream& out, const ForwardReport& rep) {
  csv_detail::row(out, {"t", "mean_f", "mean_f_se", "derivative", "mean_lf", "residual", "residual_se"});
  const std::size_t points = rep.times.size();
  for (std::size_t m = 0; m < points; ++m) {
    std::vector<std::string> cells{fmt(rep.times[m]), fmt(rep.mean_f[m]), fmt(rep.mean_f_se[m])};
    if (m == 0 || m + 1 == points) {
      cells.insert(cells.end(), 4, "");
    } else {
      const std::size_t k = m - 1;
      for (double x : {rep.derivative[k], rep.mean_lf[k], rep.residual[k], rep.residual_se[k]}) cells.push_back(fmt(x));
    }
    csv_detail::row(out, cells);
  }
}

inline void write_intensity_csv(std::ostream& out, const IntensityEstimate& est) {
  csv_detail::row(out, {"t", "count", "count_se", "rate", "rate_se"});
  for (std::size_t m = 0; m < est.grid.size(); ++m)
    csv_detail::row(out, {fmt(est.grid[m]), fmt(est.count[m]), fmt(est.count_se[m]), fmt(est.rate[m]),
                          fmt(est.rate_se[m])});
}

}  // namespace shs::io
