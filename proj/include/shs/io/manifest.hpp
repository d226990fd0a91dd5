#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <string>

#include "shs/io/json.hpp"

namespace shs::io {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string command;
  std::string digest;
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  Numerics numerics;
  std::uint64_t reps = 0;
  std::string started;
  std::string finished;

  static RunManifest begin(std::string command, const ScenarioConfig& cfg, std::uint64_t reps = 0) {
    RunManifest m;
    m.command = std::move(command);
    m.digest = config_digest(cfg);
    m.seed = cfg.seed;
    m.numerics = cfg.numerics;
    m.reps = reps;
    m.started = utc_now();
    return m;
  }

  void finish() { finished = utc_now(); }

  /// Wall times sit under their own key so reruns differ only there.
  Json to_json() const {
    return {{"command", command},
            {"config_digest", digest},
            {"seed", seed},
            {"version", version},
            {"numerics",
             {{"dt", numerics.dt},
              {"horizon", numerics.horizon},
              {"stride", numerics.stride},
              {"max_jumps", numerics.max_jumps}}},
            {"reps", reps},
            {"wall_time", {{"start", started}, {"end", finished}}}};
  }
};

}  // namespace shs::io
