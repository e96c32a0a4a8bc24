#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "cotforge/corpus.hpp"
#include "cotforge/jsonl.hpp"
#include "cotforge/orchestrator.hpp"
#include "cotforge/reward.hpp"
#include "cotforge/simulator.hpp"

namespace cotforge {

// Missing or unreadable config, unknown key, wrong type or invalid value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalConfig {
  std::string reward_preset = "default";
  RewardConfig reward = preset("default");  // preset plus overrides

  std::size_t repetition_n = 40;
  double repetition_p = -0.05;

  double gamma_correct = 1.0;
  double gamma_penalty = 1.0;
  double lambda = 1.0;

  DedupParams dedup;
  MineParams mine;

  sim::SimConfig simulator;

  llm::EndpointSettings endpoint;  // url and token still come from the environment when empty

  std::uint64_t seed = 0;
};

// Every key optional; unknown keys are rejected.
GlobalConfig parse_global_config(const io::Json& j);
GlobalConfig load_global_config(const std::string& path);
io::Json to_json(const GlobalConfig& cfg);

sim::SimConfig parse_sim_config(const io::Json& j, sim::SimConfig base = {});
sim::SimConfig load_sim_config(const std::string& path);
io::Json to_json(const sim::SimConfig& cfg);

struct SimRun {
  sim::SimConfig config;
  std::string swept_key;  // empty for a single run
  double swept_value = 0.0;
};

// A simulator object, or a sweep:
//   {"description": ..., "base": {...}, "sweep": {"gamma_correct" | "gamma_penalty": [values]}}
std::vector<SimRun> parse_sim_plan(const io::Json& j);
std::vector<SimRun> load_sim_plan(const std::string& path);

}  // namespace cotforge
