#include "cotforge/config.hpp"

#include <array>
#include <fstream>
#include <limits>
#include <set>
#include <type_traits>

namespace cotforge {

namespace {

using io::Json;

class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  void get(const char* key, double& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, bool& out) {
    if (const Json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const Json* v = take(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  template <class Int>
  void get_int(const char* key, Int& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          out = static_cast<Int>(v->get<std::uint64_t>());
          return;
        }
        fail(key, "expected a nonnegative integer");
      } else {
        const auto x = v->get<std::int64_t>();
        if (x < std::numeric_limits<Int>::min() || x > std::numeric_limits<Int>::max()) fail(key, "out of range");
        out = static_cast<Int>(x);
      }
    }
  }
  void get(const char* key, long& out) { get_int(key, out); }
  void get(const char* key, int& out) { get_int(key, out); }
  void get(const char* key, std::size_t& out) { get_int(key, out); }
  void get(const char* key, std::array<double, sim::kNumActions>& out) {
    if (const Json* v = take(key)) {
      if (!v->is_array() || v->size() != out.size()) fail(key, "expected an array of 4 numbers");
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(*v)[i].is_number()) fail(key, "expected an array of 4 numbers");
        out[i] = (*v)[i].get<double>();
      }
    }
  }

  const Json* sub(const char* key) { return take(key); }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where() + "unknown key \"" + key + "\"");
    }
  }

 private:
  const Json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  [[noreturn]] void fail(const char* key, const std::string& msg) const {
    throw ConfigError(child(key) + ": " + msg);
  }
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

sim::SimConfig read_sim(ObjectReader& r, sim::SimConfig c) {
  std::string description;
  r.get("description", description);
  r.get("max_length", c.max_length);
  r.get("work_block", c.work_block);
  r.get("branch_block", c.branch_block);
  r.get("repeat_block", c.repeat_block);
  r.get("answer_block", c.answer_block);
  r.get("min_difficulty", c.min_difficulty);
  r.get("max_difficulty", c.max_difficulty);
  r.get("progress_cap", c.progress_cap);
  r.get("dead_start_prob", c.dead_start_prob);
  r.get("branch_revive_prob", c.branch_revive_prob);
  r.get("work_progress_prob", c.work_progress_prob);
  r.get("steepness", c.steepness);
  r.get("reward", c.reward);
  r.get("repetition_penalty", c.repetition_penalty);
  r.get("repetition_n", c.repetition_n);
  r.get("repetition_p", c.repetition_p);
  r.get("gamma_correct", c.gamma_correct);
  r.get("gamma_penalty", c.gamma_penalty);
  r.get("clip_eps", c.clip_eps);
  r.get("entropy_coef", c.entropy_coef);
  r.get("kl_coef", c.kl_coef);
  r.get("actor_step", c.actor_step);
  r.get("shared_step", c.shared_step);
  r.get("critic_step", c.critic_step);
  r.get("ppo_epochs", c.ppo_epochs);
  r.get("whiten_advantages", c.whiten_advantages);
  r.get("init_logits", c.init_logits);
  r.get("episodes_per_iteration", c.episodes_per_iteration);
  r.get("iterations", c.iterations);
  std::size_t seed = c.seed;
  r.get("seed", seed);
  c.seed = seed;
  r.get("workers", c.workers);
  r.finish();
  try {
    c.check();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("simulator config: ") + e.what());
  }
  return c;
}

}  // namespace

sim::SimConfig parse_sim_config(const Json& j, sim::SimConfig base) {
  ObjectReader r(j, "");
  return read_sim(r, base);
}

sim::SimConfig load_sim_config(const std::string& path) { return parse_sim_config(load_json_file(path)); }

Json to_json(const sim::SimConfig& c) {
  return Json{{"max_length", c.max_length},
              {"work_block", c.work_block},
              {"branch_block", c.branch_block},
              {"repeat_block", c.repeat_block},
              {"answer_block", c.answer_block},
              {"min_difficulty", c.min_difficulty},
              {"max_difficulty", c.max_difficulty},
              {"progress_cap", c.progress_cap},
              {"dead_start_prob", c.dead_start_prob},
              {"branch_revive_prob", c.branch_revive_prob},
              {"work_progress_prob", c.work_progress_prob},
              {"steepness", c.steepness},
              {"reward", c.reward},
              {"repetition_penalty", c.repetition_penalty},
              {"repetition_n", c.repetition_n},
              {"repetition_p", c.repetition_p},
              {"gamma_correct", c.gamma_correct},
              {"gamma_penalty", c.gamma_penalty},
              {"clip_eps", c.clip_eps},
              {"entropy_coef", c.entropy_coef},
              {"kl_coef", c.kl_coef},
              {"actor_step", c.actor_step},
              {"shared_step", c.shared_step},
              {"critic_step", c.critic_step},
              {"ppo_epochs", c.ppo_epochs},
              {"whiten_advantages", c.whiten_advantages},
              {"init_logits", c.init_logits},
              {"episodes_per_iteration", c.episodes_per_iteration},
              {"iterations", c.iterations},
              {"seed", c.seed},
              {"workers", c.workers}};
}

std::vector<SimRun> parse_sim_plan(const Json& j) {
  if (!j.is_object() || !j.contains("sweep")) return {SimRun{parse_sim_config(j), "", 0.0}};
  ObjectReader root(j, "");
  std::string description;
  root.get("description", description);
  const Json* base_json = root.sub("base");
  const Json* sweep_json = root.sub("sweep");
  root.finish();
  const auto base = base_json ? parse_sim_config(*base_json) : sim::SimConfig{};
  if (!sweep_json->is_object() || sweep_json->size() != 1) {
    throw ConfigError("sweep: expected exactly one of gamma_correct, gamma_penalty");
  }
  const auto entry = sweep_json->begin();
  const std::string key = entry.key();
  const Json& values = entry.value();
  if (key != "gamma_correct" && key != "gamma_penalty") throw ConfigError("sweep: cannot sweep \"" + key + "\"");
  if (!values.is_array() || values.empty()) throw ConfigError("sweep." + key + ": expected a non-empty array");
  std::vector<SimRun> runs;
  for (const auto& v : values) {
    if (!v.is_number()) throw ConfigError("sweep." + key + ": expected numbers");
    SimRun run{base, key, v.get<double>()};
    (key == "gamma_correct" ? run.config.gamma_correct : run.config.gamma_penalty) = run.swept_value;
    try {
      run.config.check();
    } catch (const std::exception& e) {
      throw ConfigError("sweep." + key + ": " + e.what());
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

std::vector<SimRun> load_sim_plan(const std::string& path) { return parse_sim_plan(load_json_file(path)); }

GlobalConfig parse_global_config(const Json& j) {
  GlobalConfig cfg;
  ObjectReader root(j, "");
  std::size_t seed = 0;
  root.get("seed", seed);
  cfg.seed = seed;

  if (const Json* rj = root.sub("reward")) {
    ObjectReader r(*rj, "reward");
    r.get("preset", cfg.reward_preset);
    long max_length = kDefaultMaxLength;
    r.get("max_length", max_length);
    try {
      cfg.reward = preset(cfg.reward_preset, max_length);
    } catch (const std::out_of_range&) {
      throw ConfigError("reward.preset: unknown preset \"" + cfg.reward_preset + "\"");
    }
    r.get("r0_correct", cfg.reward.r0_correct);
    r.get("rL_correct", cfg.reward.rL_correct);
    r.get("r0_wrong", cfg.reward.r0_wrong);
    r.get("rL_wrong", cfg.reward.rL_wrong);
    r.get("exceed_penalty", cfg.reward.exceed_penalty);
    r.finish();
  }
  if (const Json* rj = root.sub("repetition")) {
    ObjectReader r(*rj, "repetition");
    r.get("n", cfg.repetition_n);
    r.get("p", cfg.repetition_p);
    r.finish();
  }
  if (const Json* dj = root.sub("discounts")) {
    ObjectReader r(*dj, "discounts");
    r.get("gamma_correct", cfg.gamma_correct);
    r.get("gamma_penalty", cfg.gamma_penalty);
    r.get("lambda", cfg.lambda);
    r.finish();
  }
  if (const Json* cj = root.sub("corpus")) {
    ObjectReader r(*cj, "corpus");
    r.get("k", cfg.dedup.k);
    r.get("num_hashes", cfg.dedup.num_hashes);
    r.get("bands", cfg.dedup.bands);
    r.get("rows", cfg.dedup.rows);
    r.get("threshold", cfg.dedup.threshold);
    r.get("workers", cfg.dedup.workers);
    r.get("mine_k", cfg.mine.k);
    r.get("mine_num_hashes", cfg.mine.num_hashes);
    r.get("mine_threshold", cfg.mine.threshold);
    r.finish();
    cfg.mine.workers = cfg.dedup.workers;
  }
  cfg.simulator.seed = cfg.seed;
  if (const Json* sj = root.sub("simulator")) {
    ObjectReader r(*sj, "simulator");
    cfg.simulator = read_sim(r, cfg.simulator);
  }
  if (const Json* ej = root.sub("endpoint")) {
    ObjectReader r(*ej, "endpoint");
    r.get("url", cfg.endpoint.url);
    r.get("timeout_seconds", cfg.endpoint.timeout_seconds);
    r.get("retries", cfg.endpoint.retries);
    r.finish();
  }
  root.finish();

  cfg.dedup.seed = cfg.seed;
  cfg.mine.seed = cfg.seed;
  try {
    cfg.reward.check();
    cfg.dedup.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.repetition_n == 0) throw ConfigError("repetition.n must be >= 1");
  for (double g : {cfg.gamma_correct, cfg.gamma_penalty, cfg.lambda}) {
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("discounts must lie in [0, 1]");
  }
  if (cfg.mine.k == 0 || cfg.mine.num_hashes == 0) throw ConfigError("corpus.mine_k and mine_num_hashes must be >= 1");
  if (cfg.endpoint.retries < 0 || !(cfg.endpoint.timeout_seconds > 0.0)) {
    throw ConfigError("endpoint.retries must be >= 0 and timeout_seconds > 0");
  }
  return cfg;
}

GlobalConfig load_global_config(const std::string& path) { return parse_global_config(load_json_file(path)); }

Json to_json(const GlobalConfig& cfg) {
  return Json{{"seed", cfg.seed},
              {"reward",
               {{"preset", cfg.reward_preset},
                {"max_length", cfg.reward.max_length},
                {"r0_correct", cfg.reward.r0_correct},
                {"rL_correct", cfg.reward.rL_correct},
                {"r0_wrong", cfg.reward.r0_wrong},
                {"rL_wrong", cfg.reward.rL_wrong},
                {"exceed_penalty", cfg.reward.exceed_penalty}}},
              {"repetition", {{"n", cfg.repetition_n}, {"p", cfg.repetition_p}}},
              {"discounts",
               {{"gamma_correct", cfg.gamma_correct}, {"gamma_penalty", cfg.gamma_penalty}, {"lambda", cfg.lambda}}},
              {"corpus",
               {{"k", cfg.dedup.k},
                {"num_hashes", cfg.dedup.num_hashes},
                {"bands", cfg.dedup.bands},
                {"rows", cfg.dedup.rows},
                {"threshold", cfg.dedup.threshold},
                {"workers", cfg.dedup.workers},
                {"mine_k", cfg.mine.k},
                {"mine_num_hashes", cfg.mine.num_hashes},
                {"mine_threshold", cfg.mine.threshold}}},
              {"simulator", to_json(cfg.simulator)},
              {"endpoint",
               {{"url", cfg.endpoint.url},
                {"timeout_seconds", cfg.endpoint.timeout_seconds},
                {"retries", cfg.endpoint.retries}}}};
}

}  // namespace cotforge
