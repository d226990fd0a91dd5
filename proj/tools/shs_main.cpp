// shs: simulate communicating stochastic hybrid agents and check their
// abstraction and Kolmogorov identities from the command line.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include "shs/analysis/abstraction_model.hpp"
#include "shs/analysis/first_passage.hpp"
#include "shs/analysis/intensity.hpp"
#include "shs/analysis/kolmogorov.hpp"
#include "shs/io/csv.hpp"
#include "shs/io/json.hpp"
#include "shs/io/manifest.hpp"
#include "shs/swarm/abstraction.hpp"
#include "shs/swarm/bench.hpp"
#include "shs/swarm/compose.hpp"
#include "shs/swarm/simulate.hpp"

namespace fs = std::filesystem;
using namespace shs;
using io::Json;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

/// Thrown for bad flags that CLI11 cannot see, such as a malformed --function.
struct UsageError : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "usage_error"; }
};

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<std::uint64_t> reps;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Master seed override");
  cmd->add_option("--dt", c.dt, "Time step override");
  cmd->add_option("--horizon", c.horizon, "Horizon override");
  cmd->add_option("--reps", c.reps, "Replications");
  cmd->add_option("--out", c.out, "Output directory (file for compose)");
}

void apply(ScenarioConfig& cfg, const Common& c) {
  if (c.dt) cfg.numerics.dt = *c.dt;
  if (c.horizon) cfg.numerics.horizon = *c.horizon;
  if (c.seed && *c.seed != cfg.seed) {
    cfg.seed = *c.seed;
    // A random graph follows the seed, so the canonical form stays reloadable.
    if (cfg.random_graph)
      cfg.coupling = CouplingSpec(cfg.n_agents, cfg.dim, cfg.coupling.threshold(),
                                  materialize_random_graph(*cfg.random_graph, cfg.n_agents, cfg.dim, cfg.seed));
  }
  cfg.validate();
}

ScenarioConfig load(const std::string& path, const Common& c) {
  auto cfg = io::load_scenario(path);
  apply(cfg, c);
  return cfg;
}

fs::path out_dir(const Common& c, const fs::path& fallback = ".") {
  fs::path dir = c.out.empty() ? fallback : fs::path(c.out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  fn(f);
}

void report(const Json& j, const fs::path* dir = nullptr, const char* name = "report.json") {
  std::cout << j.dump(2) << '\n';
  if (dir) write_text(*dir / name, j.dump(2) + "\n");
}

Json vec_json(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Vec parse_list(const std::string& s, const char* flag) {
  Vec out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(io::parse_double(item, flag));
    } catch (const Error&) {
      throw UsageError(std::string(flag) + ": expected comma-separated numbers");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

Vec uniform_grid(double step, double end) {
  if (!(step > 0.0) || !(end > 0.0)) throw UsageError("grid step and end must be positive");
  Vec g{0.0};
  const auto bins = static_cast<std::size_t>(std::ceil(end / step - 1e-9));
  for (std::size_t m = 1; m <= bins; ++m) g.push_back(std::min(end, static_cast<double>(m) * step));
  return g;
}

/// "tau:I", "beta:I:P" or "const:C"; I and P count from 0.
TestFunction parse_function(const std::string& s, const Layout& layout) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  auto index = [&](std::size_t k, std::size_t limit) {
    std::size_t v = 0;
    try {
      v = io::parse_uint(parts.at(k), "--function");
    } catch (const std::exception&) {
      throw UsageError("--function: bad index in '" + s + "'");
    }
    if (v >= limit) throw UsageError("--function: index out of range in '" + s + "'");
    return v;
  };
  if (parts.size() == 2 && parts[0] == "tau") return TestFunction::clock(index(1, layout.n));
  if (parts.size() == 3 && parts[0] == "beta")
    return TestFunction::coordinate(layout.beta(index(1, layout.n), index(2, layout.d)));
  if (parts.size() == 2 && parts[0] == "const") return TestFunction::constant(parse_list(parts[1], "--function")[0]);
  throw UsageError("--function: expected tau:I, beta:I:P or const:C, got '" + s + "'");
}

/// Abstraction state with every guard at its kernel mean and every clock at tau.
Vec default_point(const ScenarioConfig& cfg, const Layout& layout, double tau) {
  Vec x(layout.width, tau);
  for (std::size_t i = 0; i < cfg.n_agents; ++i) {
    const auto mean = cfg.agents[i].guard.reset.nominal_mean();
    for (std::size_t p = 0; p < cfg.dim; ++p) x[layout.beta(i, p)] = mean[p];
  }
  return x;
}

Json residual_json(const ResidualReport& r) {
  return {{"lhs", r.lhs.value},     {"lhs_se", r.lhs.se}, {"rhs", r.rhs.value},
          {"rhs_se", r.rhs.se},     {"residual", r.residual}, {"se", r.se},
          {"bias_bound", r.bias_bound}, {"pass", r.pass}};
}

void write_manifest(const fs::path& dir, io::RunManifest m) {
  m.finish();
  write_text(dir / "manifest.json", m.to_json().dump(2) + "\n");
}

SwarmTrace read_run(const fs::path& dir) {
  std::ifstream trace(dir / "trace.csv"), jumps(dir / "jumps.csv");
  if (!trace || !jumps) throw CorruptInput(dir.string() + ": expected trace.csv and jumps.csv");
  auto tr = io::read_trace_csv(trace, jumps);
  if (fs::exists(dir / "scenario.json")) {
    const auto cfg = io::load_scenario((dir / "scenario.json").string());
    for (const auto& a : cfg.agents) tr.guard_k.push_back(a.guard.k);
  } else {
    tr.guard_k.assign(tr.n, 0.0);
  }
  return tr;
}

// --- commands ------------------------------------------------------------------

int cmd_simulate(const std::string& scenario, std::uint64_t replication, const Common& c) {
  const auto cfg = load(scenario, c);
  const auto dir = out_dir(c);
  auto manifest = io::RunManifest::begin("simulate", cfg, replication);
  const auto tr = simulate_swarm(cfg, replication);
  write_with(dir / "trace.csv", [&](std::ostream& o) { io::write_trace_csv(o, tr); });
  write_with(dir / "jumps.csv", [&](std::ostream& o) { io::write_jumps_csv(o, tr); });
  write_text(dir / "scenario.json", io::serialize_scenario(cfg));
  write_manifest(dir, manifest);
  report({{"agents", tr.n}, {"samples", tr.samples()}, {"jumps", tr.jumps.size()}, {"out", dir.string()}});
  return kPass;
}

int cmd_abstract(const std::string& run, const Common& c) {
  const auto tr = read_run(run);
  const auto dir = out_dir(c, run);
  const auto abs = extract_abstraction(tr);
  write_with(dir / "abstraction.csv", [&](std::ostream& o) { io::write_abstraction_csv(o, abs, tr.ids); });
  report({{"agents", abs.n}, {"samples", abs.samples()}, {"events", abs.events.size()}});
  return kPass;
}

int cmd_roundtrip(const std::string& run, const std::string& scenario, std::uint64_t replication, const Common& c) {
  SwarmTrace tr;
  if (!scenario.empty()) tr = simulate_swarm(load(scenario, c), replication);
  else if (!run.empty()) tr = read_run(run);
  else throw UsageError("verify-roundtrip: give --run or --scenario");
  std::size_t mismatches = 0;
  std::string failure;
  try {
    const auto times = reconstruct_jump_times(extract_abstraction(tr));
    for (std::size_t i = 0; i < tr.n; ++i)
      if (times[i] != tr.jump_times(i)) ++mismatches;
  } catch (const CorruptInput& e) {
    failure = e.what();
  }
  const bool pass = failure.empty() && mismatches == 0;
  Json j = {{"agents", tr.n}, {"jumps", tr.jumps.size()}, {"mismatched_agents", mismatches}, {"pass", pass}};
  if (!failure.empty()) j["failure"] = failure;
  report(j);
  return pass ? kPass : kFail;
}

int cmd_fp(const std::string& scenario, std::size_t agent, const std::string& gamma_s, std::optional<double> nb_clock,
           double step, std::optional<double> end, double eps, const Common& c) {
  const auto cfg = load(scenario, c);
  if (agent >= cfg.n_agents) throw UsageError("--agent: no agent at index " + std::to_string(agent));
  const auto& spec = cfg.agents[agent];
  Vec gamma = gamma_s.empty() ? spec.guard.reset.nominal_mean() : parse_list(gamma_s, "--gamma");
  Vec clocks(cfg.n_agents, std::numeric_limits<double>::infinity());
  if (nb_clock)
    for (std::size_t j = 0; j < cfg.n_agents; ++j)
      if (j != agent) clocks[j] = *nb_clock;
  const auto cond = freeze_conditioning(cfg, agent, gamma, clocks);
  const auto grid = uniform_grid(step, end.value_or(cfg.numerics.horizon));
  const std::size_t reps = c.reps.value_or(10000);
  const auto dir = out_dir(c);
  auto manifest = io::RunManifest::begin("estimate-fp", cfg, reps);
  const auto est = estimate_first_passage(spec, cond, grid, reps, {cfg.numerics.dt, cfg.seed});
  write_with(dir / "fp.csv", [&](std::ostream& o) { io::write_first_passage_csv(o, est); });
  const auto rate = rate_estimate(est, eps);
  write_with(dir / "rate.csv", [&](std::ostream& o) {
    o << "t_lo,t_hi,lambda,valid\n";
    for (std::size_t m = 0; m < rate.lambda.size(); ++m)
      o << io::fmt(rate.grid[m]) << ',' << io::fmt(rate.grid[m + 1]) << ',' << io::fmt(rate.lambda[m]) << ','
        << (rate.valid[m] ? 1 : 0) << '\n';
  });
  write_manifest(dir, manifest);
  report({{"agent", spec.id},
          {"reps", est.reps},
          {"hits", est.hits},
          {"truncated", est.truncated},
          {"neighbors", cond.neighbors.size()},
          {"rate_valid_until", rate.valid_until()}});
  return kPass;
}

int cmd_generator(const std::string& scenario, const std::string& fn, const std::string& point_s, double tau, double h,
                  const Common& c) {
  const auto cfg = load(scenario, c);
  const auto model = [&] {
    auto m = abstraction_model(cfg);
    m.seed = cfg.seed;
    m.guard_dt = cfg.numerics.dt;
    return m;
  }();
  const auto f = parse_function(fn, model.layout);
  const Vec x0 = point_s.empty() ? default_point(cfg, model.layout, tau) : parse_list(point_s, "--point");
  if (x0.size() != model.layout.width) throw UsageError("--point: expected " + std::to_string(model.layout.width) + " values");
  const auto rep = generator_residual(model, f, x0, c.reps.value_or(100000), {.h = h});
  Json j = residual_json(rep);
  j["point"] = vec_json(x0);
  j["h"] = h;
  std::optional<fs::path> dir;
  if (!c.out.empty()) dir = out_dir(c);
  report(j, dir ? &*dir : nullptr);
  return rep.pass ? kPass : kFail;
}

int cmd_forward(const std::string& scenario, const std::string& fn, const std::string& point_s, double t_end,
                double h, const Common& c) {
  const auto cfg = load(scenario, c);
  auto model = abstraction_model(cfg);
  model.seed = cfg.seed;
  model.guard_dt = cfg.numerics.dt;
  const auto f = parse_function(fn, model.layout);
  const Vec x0 = point_s.empty() ? default_point(cfg, model.layout, 0.0) : parse_list(point_s, "--point");
  if (x0.size() != model.layout.width) throw UsageError("--point: expected " + std::to_string(model.layout.width) + " values");
  const auto rep = forward_equation_residual(model, f, x0, t_end, c.reps.value_or(10000), {.h = h});
  if (!c.out.empty()) {
    const auto dir = out_dir(c);
    write_with(dir / "forward.csv", [&](std::ostream& o) { io::write_forward_csv(o, rep); });
  }
  report({{"points", rep.times.size()},
          {"max_abs_residual", rep.max_abs_residual},
          {"bias_bound", rep.bias_bound},
          {"residual", vec_json(rep.residual)},
          {"residual_se", vec_json(rep.residual_se)},
          {"pass", rep.pass}});
  return rep.pass ? kPass : kFail;
}

int cmd_intensity(const std::string& scenario, const std::string& lo_s, const std::string& hi_s, double step,
                  const Common& c) {
  const auto cfg = load(scenario, c);
  Box region = Box::unbounded(cfg.dim);
  if (!lo_s.empty()) region.lo = parse_list(lo_s, "--lo");
  if (!hi_s.empty()) region.hi = parse_list(hi_s, "--hi");
  if (region.lo.size() != cfg.dim || region.hi.size() != cfg.dim) throw UsageError("--lo/--hi: expected dim values");
  const std::size_t reps = c.reps.value_or(200);
  const auto dir = out_dir(c);
  auto manifest = io::RunManifest::begin("intensity", cfg, reps);
  std::vector<SwarmTrace> ensemble;
  ensemble.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) ensemble.push_back(simulate_swarm(cfg, r, {.record_samples = false}));
  const auto est = mean_jump_intensity(ensemble, region, uniform_grid(step, cfg.numerics.horizon));
  write_with(dir / "intensity.csv", [&](std::ostream& o) { io::write_intensity_csv(o, est); });
  write_manifest(dir, manifest);
  report({{"reps", reps}, {"points", est.grid.size()}, {"final_count", est.count.back()}});
  return kPass;
}

Wire parse_wire(const std::string& s, std::size_t d) {
  const auto a = s.find(':'), b = s.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) throw UsageError("--wire: expected FROM:TO:W[,W...]");
  Wire w;
  try {
    w.output_agent = io::parse_uint(s.substr(0, a), "--wire");
    w.input_agent = io::parse_uint(s.substr(a + 1, b - a - 1), "--wire");
  } catch (const Error&) {
    throw UsageError("--wire: expected FROM:TO:W[,W...]");
  }
  w.weight = parse_list(s.substr(b + 1), "--wire");
  if (w.weight.size() == 1 && d > 1) w.weight.assign(d, w.weight[0]);
  return w;
}

int cmd_compose(const std::string& a_path, const std::string& b_path, const std::vector<std::string>& wires,
                const Common& c) {
  const auto a = load(a_path, c);
  const auto b = io::load_scenario(b_path);
  std::vector<Wire> wiring;
  for (const auto& s : wires) wiring.push_back(parse_wire(s, a.dim));
  auto merged = compose_collectives(a, b, wiring);
  merged.validate();
  const auto text = io::serialize_scenario(merged);
  if (c.out.empty()) std::cout << text;
  else write_text(c.out, text);
  return kPass;
}

int cmd_bench(const std::string& scenario, std::size_t agents, double degree, const Common& c) {
  ScenarioConfig cfg;
  if (!scenario.empty()) {
    cfg = load(scenario, c);
  } else {
    cfg = benchmark_scenario(agents, degree, c.seed.value_or(1), c.dt.value_or(1e-3), c.horizon.value_or(10.0));
    cfg.validate();
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto tr = simulate_swarm(cfg, 0, {.record_samples = false});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double steps = static_cast<double>(cfg.n_agents) * static_cast<double>(step_count(cfg.numerics));
  report({{"agents", cfg.n_agents},
          {"edges", cfg.coupling.edges().size()},
          {"agent_steps", steps},
          {"jumps", tr.jumps.size()},
          {"seconds", secs},
          {"agent_steps_per_second", steps / secs}});
  return kPass;
}

void print_error(const char* kind, const std::string& message, const std::vector<std::string>& problems = {}) {
  Json j = {{"error", kind}, {"message", message}};
  if (!problems.empty()) j["problems"] = problems;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Communicating stochastic hybrid agents: simulation and verification"};
  app.require_subcommand(1);
  Common c;
  std::string scenario, run, fn = "tau:0", point, gamma, lo, hi, a_path, b_path;
  std::vector<std::string> wires;
  std::uint64_t replication = 0;
  std::size_t agent = 0, agents = 1000;
  double step = 0.05, eps = 0.05, tau = 0.3, h_gen = 0.01, h_fwd = 0.1, t_end = 2.0, degree = 8.0;
  std::optional<double> nb_clock, fp_end;

  auto* sim = app.add_subcommand("simulate", "Simulate a scenario into trace, jump log and manifest");
  sim->add_option("--scenario", scenario, "Scenario JSON")->required();
  sim->add_option("--replication", replication, "Replication index");
  add_common(sim, c);

  auto* abs = app.add_subcommand("abstract", "Project a simulated run onto guards and clocks");
  abs->add_option("--run", run, "Directory written by simulate")->required();
  add_common(abs, c);

  auto* rt = app.add_subcommand("verify-roundtrip", "Recover every jump time from the abstraction");
  rt->add_option("--run", run, "Directory written by simulate");
  rt->add_option("--scenario", scenario, "Scenario JSON to simulate instead");
  rt->add_option("--replication", replication, "Replication index");
  add_common(rt, c);

  auto* fp = app.add_subcommand("estimate-fp", "First-passage law and hazard of one agent");
  fp->add_option("--scenario", scenario, "Scenario JSON")->required();
  fp->add_option("--agent", agent, "Agent index");
  fp->add_option("--gamma", gamma, "Guard reset value, comma-separated (default: kernel mean)");
  fp->add_option("--neighbor-clock", nb_clock, "Frozen clock of every coupled neighbour");
  fp->add_option("--grid-step", step, "Bin width");
  fp->add_option("--grid-end", fp_end, "Last grid point (default: horizon)");
  fp->add_option("--epsilon", eps, "Survival floor for the hazard");
  add_common(fp, c);

  auto* gen = app.add_subcommand("verify-generator", "Compare (P_h f - f)/h with the generator");
  gen->add_option("--scenario", scenario, "Scenario JSON with abstract rates")->required();
  gen->add_option("--function", fn, "tau:I, beta:I:P or const:C");
  gen->add_option("--point", point, "Abstraction state, comma-separated");
  gen->add_option("--tau", tau, "Clock value for the default point");
  gen->add_option("--diff-step", h_gen, "Difference step h");
  add_common(gen, c);

  auto* fwd = app.add_subcommand("verify-forward", "Check d/dt P_t f = P_t Lf along a time grid");
  fwd->add_option("--scenario", scenario, "Scenario JSON with abstract rates")->required();
  fwd->add_option("--function", fn, "tau:I, beta:I:P or const:C");
  fwd->add_option("--point", point, "Initial abstraction state, comma-separated");
  fwd->add_option("--t-end", t_end, "Last time point");
  fwd->add_option("--diff-step", h_fwd, "Grid spacing h");
  add_common(fwd, c);

  auto* inten = app.add_subcommand("intensity", "Mean jump intensity from a region");
  inten->add_option("--scenario", scenario, "Scenario JSON")->required();
  inten->add_option("--lo", lo, "Region lower corner on pre-jump positions");
  inten->add_option("--hi", hi, "Region upper corner on pre-jump positions");
  inten->add_option("--grid-step", step, "Grid spacing");
  add_common(inten, c);

  auto* comp = app.add_subcommand("compose", "Wire the outputs of one collective into another");
  comp->add_option("--a", a_path, "Upstream scenario")->required();
  comp->add_option("--b", b_path, "Downstream scenario")->required();
  comp->add_option("--wire", wires, "FROM:TO:W[,W...] agent indices within a and b");
  add_common(comp, c);

  auto* bench = app.add_subcommand("bench", "Throughput of the swarm simulator");
  bench->add_option("--scenario", scenario, "Scenario JSON (default: random sparse collective)");
  bench->add_option("--agents", agents, "Number of agents");
  bench->add_option("--degree", degree, "Mean coupling degree");
  add_common(bench, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage_error", e.what());
    return kUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(scenario, replication, c);
    if (abs->parsed()) return cmd_abstract(run, c);
    if (rt->parsed()) return cmd_roundtrip(run, scenario, replication, c);
    if (fp->parsed()) return cmd_fp(scenario, agent, gamma, nb_clock, step, fp_end, eps, c);
    if (gen->parsed()) return cmd_generator(scenario, fn, point, tau, h_gen, c);
    if (fwd->parsed()) return cmd_forward(scenario, fn, point, t_end, h_fwd, c);
    if (inten->parsed()) return cmd_intensity(scenario, lo, hi, step, c);
    if (comp->parsed()) return cmd_compose(a_path, b_path, wires, c);
    if (bench->parsed()) return cmd_bench(scenario, agents, degree, c);
  } catch (const ValidationError& e) {
    print_error(e.kind(), e.what(), e.problems());
    return kUsage;
  } catch (const ParseError& e) {
    print_error(e.kind(), e.what());
    return kUsage;
  } catch (const UsageError& e) {
    print_error(e.kind(), e.what());
    return kUsage;
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return kFail;
  } catch (const std::exception& e) {
    print_error("error", e.what());
    return kFail;
  }
  return kUsage;
}
