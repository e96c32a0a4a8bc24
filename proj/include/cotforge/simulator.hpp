#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cotforge/advantage.hpp"
#include "cotforge/repetition.hpp"
#include "cotforge/reward.hpp"

namespace cotforge::sim {

enum class Action : std::uint8_t { Work = 0, Branch = 1, Repeat = 2, Answer = 3 };
inline constexpr std::size_t kNumActions = 4;

std::string_view to_string(Action a);

enum class Outcome : std::uint8_t { Correct, Wrong, Exceeded };

std::string_view to_string(Outcome o);

inline constexpr TokenId kPadToken = 0;
inline constexpr TokenId kAltToken = 1;
inline constexpr TokenId kFirstFreshToken = 2;

// Toy chain-of-thought environment plus the trainer's hyperparameters.
struct SimConfig {
  long max_length = 512;
  long work_block = 8;
  long branch_block = 8;
  long repeat_block = 8;  // only used when REPEAT has no previous block to copy
  long answer_block = 4;

  int min_difficulty = 1;
  int max_difficulty = 8;
  int progress_cap = 15;  // observed progress is min(p, progress_cap)

  double dead_start_prob = 0.3;
  double branch_revive_prob = 0.7;
  double work_progress_prob = 0.9;
  double steepness = 1.0;  // P(correct) = 1 / (1 + exp(-steepness * (p - d)))

  // "classic", "three_way", or a cosine preset name ("default", "reward_a", ...).
  std::string reward = "default";
  bool repetition_penalty = true;
  std::size_t repetition_n = 4;
  double repetition_p = -0.05;

  double gamma_correct = 1.0;
  double gamma_penalty = 0.99;

  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  double kl_coef = 0.01;
  double actor_step = 0.05;   // per-state table step (applied to the per-state mean gradient)
  double shared_step = 0.5;  // step on the shared action preference
  double critic_step = 0.1;
  int ppo_epochs = 1;
  bool whiten_advantages = false;

  // Initial logits for WORK, BRANCH, REPEAT, ANSWER in every state.
  std::array<double, kNumActions> init_logits{0.0, 0.0, 0.0, -1.0};

  std::size_t episodes_per_iteration = 256;
  std::size_t iterations = 300;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  // Throws std::invalid_argument when any invariant is violated.
  void check() const;

  long min_block() const;
  std::size_t max_steps() const;  // upper bound on macro-steps per episode
  std::size_t num_states() const;
};

struct Observation {
  int difficulty = 1;
  int progress = 0;  // already clipped
  std::size_t step = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

std::size_t state_index(const Observation& obs, const SimConfig& cfg);

using ActionLogits = std::array<double, kNumActions>;
using ActionProbs = std::array<double, kNumActions>;

ActionProbs softmax(const ActionLogits& logits);

// Tabular softmax policy: logits(s) = table[s] + shared. The shared per-action
// preference is trained on every sample and couples states the way a function
// approximator would; the table holds per-state corrections.
struct PolicyParams {
  std::vector<ActionLogits> table;
  ActionLogits shared{};
  std::vector<double> values;

  ActionLogits logits(std::size_t state) const;

  // Table and values zero, shared preference = cfg.init_logits.
  static PolicyParams initial(const SimConfig& cfg);
};

struct PolicyGradient {
  std::vector<ActionLogits> table;
  ActionLogits shared{};
};

double kl_divergence(const ActionLogits& p_logits, const ActionLogits& q_logits);
double entropy(const ActionLogits& logits);

struct Step {
  Observation obs;
  std::size_t state = 0;
  Action action = Action::Work;
  double logprob = 0.0;  // under the behaviour policy
  std::vector<TokenId> block;
};

struct EpisodeTrace {
  std::vector<Step> steps;
  Outcome outcome = Outcome::Exceeded;
  long total_length = 0;
  int difficulty = 1;
  bool viable_at_start = true;
};

// Deterministic generator used for every stochastic choice in the simulator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();                        // [0, 1)
  std::uint64_t below(std::uint64_t n);    // [0, n)

 private:
  std::uint64_t state_;
};

// Independent per-episode seed.
std::uint64_t episode_seed(std::uint64_t run_seed, std::uint64_t iteration, std::uint64_t episode);

double correct_probability(int progress, int difficulty, double steepness);

EpisodeTrace rollout(const PolicyParams& policy, const SimConfig& cfg, Rng& rng);

// Two channels: terminal correctness reward (gamma_correct) and the per-step sum
// of token-level repetition penalties (gamma_penalty; zero when disabled).
std::vector<ChannelTrace> assign_rewards(const EpisodeTrace& trace, const SimConfig& cfg);

double terminal_reward(Outcome outcome, long total_length, const SimConfig& cfg);

struct PpoSample {
  std::size_t state = 0;
  Action action = Action::Work;
  double old_logprob = 0.0;
  double advantage = 0.0;
  double return_target = 0.0;
};

struct UpdateStats {
  double surrogate = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double value_loss = 0.0;
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  std::size_t states_updated = 0;
};

// Sample mean of
//   min(r_i A_i, clip(r_i, 1-eps, 1+eps) A_i) + c_ent H(pi_{s_i}) - c_kl KL(pi_{s_i} || pi0_{s_i})
// with r_i = pi(a_i | s_i) / exp(old_logprob_i).
double surrogate_objective(const PolicyParams& policy, const PolicyParams& initial,
                           const std::vector<PpoSample>& samples, const SimConfig& cfg);

// Analytic gradient of surrogate_objective with respect to the table and the
// shared preference.
PolicyGradient surrogate_gradient(const PolicyParams& policy, const PolicyParams& initial,
                                  const std::vector<PpoSample>& samples, const SimConfig& cfg);

// Samples from rollouts: advantages from the multi-channel estimator, return
// targets from the discounted multi-channel return.
std::vector<PpoSample> build_samples(const std::vector<EpisodeTrace>& episodes, const PolicyParams& policy,
                                     const SimConfig& cfg);

// ppo_epochs ascent steps: each visited table entry moves by actor_step times
// its gradient rescaled to a per-state mean (N / n_s), the shared preference by
// shared_step times its gradient. Then one critic step of critic_step toward the
// mean return target of each visited state.
UpdateStats ppo_update(PolicyParams& policy, const PolicyParams& initial, const std::vector<PpoSample>& samples,
                       const SimConfig& cfg);

struct IterationStats {
  std::size_t iter = 0;
  double accuracy = 0.0;
  double mean_len = 0.0;
  double len_p50 = 0.0;
  double len_p90 = 0.0;
  double exceed_rate = 0.0;
  double repeat_freq = 0.0;
  double branch_freq = 0.0;
  double kl = 0.0;
};

IterationStats summarize(std::size_t iter, const std::vector<EpisodeTrace>& episodes, const PolicyParams& policy,
                         const PolicyParams& initial, const SimConfig& cfg);

std::vector<EpisodeTrace> rollout_batch(const PolicyParams& policy, const SimConfig& cfg, std::size_t iteration);

// Emits stats for the untrained policy, then after each of cfg.iterations updates.
std::vector<IterationStats> run_experiment(const SimConfig& cfg,
                                           const std::function<void(const IterationStats&)>& on_iteration = {});

}  // namespace cotforge::sim
