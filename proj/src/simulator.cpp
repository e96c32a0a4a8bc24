#include "cotforge/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cotforge/parallel.hpp"

namespace cotforge::sim {

std::string_view to_string(Action a) {
  switch (a) {
    case Action::Work:
      return "WORK";
    case Action::Branch:
      return "BRANCH";
    case Action::Repeat:
      return "REPEAT";
    case Action::Answer:
      return "ANSWER";
  }
  return "?";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Correct:
      return "correct";
    case Outcome::Wrong:
      return "wrong";
    case Outcome::Exceeded:
      return "exceeded";
  }
  return "?";
}

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

bool is_cosine_reward(std::string_view name) {
  return name != "classic" && name != "three_way";
}

}  // namespace

void SimConfig::check() const {
  if (work_block < 1 || branch_block < 1 || repeat_block < 1 || answer_block < 1) {
    throw std::invalid_argument("block sizes must be >= 1");
  }
  if (max_length < answer_block) throw std::invalid_argument("max_length must be >= answer block size");
  if (min_difficulty < 0 || max_difficulty < min_difficulty) throw std::invalid_argument("bad difficulty range");
  if (progress_cap < 0) throw std::invalid_argument("progress_cap must be >= 0");
  if (!is_probability(dead_start_prob) || !is_probability(branch_revive_prob) ||
      !is_probability(work_progress_prob)) {
    throw std::invalid_argument("probabilities must lie in [0, 1]");
  }
  if (!(gamma_correct >= 0.0 && gamma_correct <= 1.0) || !(gamma_penalty >= 0.0 && gamma_penalty <= 1.0)) {
    throw std::invalid_argument("discounts must lie in [0, 1]");
  }
  if (repetition_n == 0) throw std::invalid_argument("repetition_n must be >= 1");
  if (clip_eps < 0.0 || entropy_coef < 0.0 || kl_coef < 0.0 || actor_step < 0.0 || shared_step < 0.0 || critic_step < 0.0) {
    throw std::invalid_argument("trainer coefficients must be nonnegative");
  }
  if (ppo_epochs < 1) throw std::invalid_argument("ppo_epochs must be >= 1");
  if (episodes_per_iteration == 0) throw std::invalid_argument("episodes_per_iteration must be >= 1");
  for (double l : init_logits) {
    if (!std::isfinite(l)) throw std::invalid_argument("init_logits must be finite");
  }
  if (is_cosine_reward(reward)) preset(reward, max_length);  // throws on an unknown name
}

long SimConfig::min_block() const { return std::min({work_block, branch_block, repeat_block, answer_block}); }

std::size_t SimConfig::max_steps() const { return static_cast<std::size_t>(max_length / min_block()) + 1; }

std::size_t SimConfig::num_states() const {
  const auto difficulties = static_cast<std::size_t>(max_difficulty - min_difficulty + 1);
  return difficulties * static_cast<std::size_t>(progress_cap + 1) * (max_steps() + 1);
}

std::size_t state_index(const Observation& obs, const SimConfig& cfg) {
  const auto d = static_cast<std::size_t>(obs.difficulty - cfg.min_difficulty);
  const auto p = static_cast<std::size_t>(std::clamp(obs.progress, 0, cfg.progress_cap));
  const std::size_t step = std::min(obs.step, cfg.max_steps());
  return (d * static_cast<std::size_t>(cfg.progress_cap + 1) + p) * (cfg.max_steps() + 1) + step;
}

ActionProbs softmax(const ActionLogits& logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  ActionProbs probs{};
  double total = 0.0;
  for (std::size_t a = 0; a < kNumActions; ++a) {
    probs[a] = std::exp(logits[a] - hi);
    total += probs[a];
  }
  for (double& p : probs) p /= total;
  return probs;
}

namespace {

ActionLogits log_softmax(const ActionLogits& logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - hi);
  const double log_z = hi + std::log(total);
  ActionLogits out{};
  for (std::size_t a = 0; a < kNumActions; ++a) out[a] = logits[a] - log_z;
  return out;
}

}  // namespace

ActionLogits PolicyParams::logits(std::size_t state) const {
  ActionLogits out = table[state];
  for (std::size_t a = 0; a < kNumActions; ++a) out[a] += shared[a];
  return out;
}

PolicyParams PolicyParams::initial(const SimConfig& cfg) {
  PolicyParams p;
  p.table.assign(cfg.num_states(), ActionLogits{});
  p.shared = cfg.init_logits;
  p.values.assign(cfg.num_states(), 0.0);
  return p;
}

double kl_divergence(const ActionLogits& p_logits, const ActionLogits& q_logits) {
  const auto lp = log_softmax(p_logits);
  const auto lq = log_softmax(q_logits);
  double kl = 0.0;
  for (std::size_t a = 0; a < kNumActions; ++a) kl += std::exp(lp[a]) * (lp[a] - lq[a]);
  return std::max(kl, 0.0);
}

double entropy(const ActionLogits& logits) {
  const auto lp = log_softmax(logits);
  double h = 0.0;
  for (double l : lp) h -= std::exp(l) * l;
  return h;
}

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  // Lemire's multiply-shift; the bias is below 2^-50 for the ranges used here.
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
}

std::uint64_t episode_seed(std::uint64_t run_seed, std::uint64_t iteration, std::uint64_t episode) {
  Rng mix(run_seed ^ 0x5851f42d4c957f2dULL);
  std::uint64_t s = mix.next();
  Rng a(s ^ (iteration * 0xd1342543de82ef95ULL));
  s = a.next();
  Rng b(s ^ (episode * 0xa0761d6478bd642fULL));
  return b.next();
}

double correct_probability(int progress, int difficulty, double steepness) {
  return 1.0 / (1.0 + std::exp(-steepness * static_cast<double>(progress - difficulty)));
}

EpisodeTrace rollout(const PolicyParams& policy, const SimConfig& cfg, Rng& rng) {
  EpisodeTrace trace;
  const auto span = static_cast<std::uint64_t>(cfg.max_difficulty - cfg.min_difficulty + 1);
  trace.difficulty = cfg.min_difficulty + static_cast<int>(rng.below(span));
  bool viable = rng.uniform() >= cfg.dead_start_prob;
  trace.viable_at_start = viable;
  int progress = 0;
  TokenId next_fresh = kFirstFreshToken;
  bool has_previous = false;  // the previous step's block is trace.steps.back().block

  auto fresh_block = [&](long size, std::vector<TokenId>& block) {
    for (long i = 0; i < size; ++i) block.push_back(next_fresh++);
  };

  for (std::size_t step = 0;; ++step) {
    Step s;
    s.obs = Observation{trace.difficulty, std::min(progress, cfg.progress_cap), step};
    s.state = state_index(s.obs, cfg);
    const auto logits = policy.logits(s.state);
    const auto probs = softmax(logits);
    const double u = rng.uniform();
    std::size_t a = 0;
    double cumulative = probs[0];
    while (a + 1 < kNumActions && u >= cumulative) cumulative += probs[++a];
    s.action = static_cast<Action>(a);
    s.logprob = log_softmax(logits)[a];

    long size = 0;
    switch (s.action) {
      case Action::Work:
        size = cfg.work_block;
        break;
      case Action::Branch:
        size = cfg.branch_block;
        break;
      case Action::Repeat:
        size = has_previous ? static_cast<long>(trace.steps.back().block.size()) : cfg.repeat_block;
        break;
      case Action::Answer:
        size = cfg.answer_block;
        break;
    }
    if (trace.total_length + size > cfg.max_length) {
      trace.outcome = Outcome::Exceeded;
      trace.steps.push_back(std::move(s));
      return trace;
    }

    s.block.reserve(static_cast<std::size_t>(size));
    bool done = false;
    switch (s.action) {
      case Action::Work:
        fresh_block(size, s.block);
        if (viable && rng.uniform() < cfg.work_progress_prob) ++progress;
        break;
      case Action::Branch:
        s.block.push_back(kAltToken);
        fresh_block(size - 1, s.block);
        viable = rng.uniform() < cfg.branch_revive_prob;
        break;
      case Action::Repeat:
        if (has_previous) {
          s.block = trace.steps.back().block;
        } else {
          s.block.assign(static_cast<std::size_t>(size), kPadToken);
        }
        break;
      case Action::Answer:
        fresh_block(size, s.block);
        trace.outcome = rng.uniform() < correct_probability(progress, trace.difficulty, cfg.steepness)
                            ? Outcome::Correct
                            : Outcome::Wrong;
        done = true;
        break;
    }
    trace.total_length += size;
    trace.steps.push_back(std::move(s));
    if (done) return trace;
    has_previous = true;
  }
}

double terminal_reward(Outcome outcome, long total_length, const SimConfig& cfg) {
  if (cfg.reward == "classic") return classic_reward(outcome == Outcome::Correct);
  if (cfg.reward == "three_way") {
    switch (outcome) {
      case Outcome::Correct:
        return three_way_reward(CorrectnessLabel::Correct);
      case Outcome::Wrong:
        return three_way_reward(CorrectnessLabel::Wrong);
      case Outcome::Exceeded:
        return three_way_reward(CorrectnessLabel::NoAnswer);
    }
  }
  const RewardConfig rc = preset(cfg.reward, cfg.max_length);
  if (outcome == Outcome::Exceeded) return cosine_reward(false, rc.max_length, rc);
  return cosine_reward(outcome == Outcome::Correct, total_length, rc);
}

std::vector<ChannelTrace> assign_rewards(const EpisodeTrace& trace, const SimConfig& cfg) {
  const std::size_t T = trace.steps.size();
  std::vector<ChannelTrace> channels(2);
  channels[0].gamma = cfg.gamma_correct;
  channels[1].gamma = cfg.gamma_penalty;
  channels[0].rewards.assign(T, 0.0);
  channels[1].rewards.assign(T, 0.0);
  if (T == 0) return channels;
  channels[0].rewards[T - 1] = terminal_reward(trace.outcome, trace.total_length, cfg);

  if (cfg.repetition_penalty && trace.total_length > 0) {
    std::vector<TokenId> tokens;
    tokens.reserve(static_cast<std::size_t>(trace.total_length));
    for (const auto& s : trace.steps) tokens.insert(tokens.end(), s.block.begin(), s.block.end());
    const auto penalty = ngram_repetition_penalty(TokenSequence::whole(std::move(tokens)), cfg.repetition_n,
                                                  cfg.repetition_p);
    std::size_t pos = 0;
    for (std::size_t t = 0; t < T; ++t) {
      double sum = 0.0;
      for (std::size_t i = 0; i < trace.steps[t].block.size(); ++i) sum += penalty.values[pos++];
      channels[1].rewards[t] = sum;
    }
  }
  return channels;
}

std::vector<PpoSample> build_samples(const std::vector<EpisodeTrace>& episodes, const PolicyParams& policy,
                                     const SimConfig& cfg) {
  std::vector<PpoSample> samples;
  for (const auto& ep : episodes) {
    const auto channels = assign_rewards(ep, cfg);
    std::vector<double> values;
    values.reserve(ep.steps.size());
    for (const auto& s : ep.steps) values.push_back(policy.values[s.state]);
    const auto returns = multi_channel_return(channels);
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      const auto& s = ep.steps[t];
      samples.push_back(PpoSample{s.state, s.action, s.logprob, returns[t] - values[t], returns[t]});
    }
  }
  if (cfg.whiten_advantages && samples.size() > 1) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.advantage;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& s : samples) var += (s.advantage - mean) * (s.advantage - mean);
    const double sd = std::sqrt(var / static_cast<double>(samples.size()));
    for (auto& s : samples) s.advantage = (s.advantage - mean) / (sd + 1e-8);
  }
  return samples;
}

namespace {

struct StateGroup {
  std::size_t state;
  std::vector<std::size_t> sample_indices;
};

// Groups sample indices by state, in ascending state order.
std::vector<StateGroup> group_by_state(const std::vector<PpoSample>& samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].state < samples[b].state; });
  std::vector<StateGroup> groups;
  for (std::size_t idx : order) {
    if (groups.empty() || groups.back().state != samples[idx].state) groups.push_back({samples[idx].state, {}});
    groups.back().sample_indices.push_back(idx);
  }
  return groups;
}

double clipped_term(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

// True when the unclipped branch is the active one (gradient flows).
bool unclipped_active(double ratio, double advantage, double eps) {
  if (advantage > 0.0) return ratio <= 1.0 + eps;
  if (advantage < 0.0) return ratio >= 1.0 - eps;
  return true;
}

struct GroupResult {
  ActionLogits grad{};  // d/dz of the group's summed objective terms
  double objective = 0.0;  // sum over the group's samples
  double surrogate = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double ratio_sum = 0.0;
  std::size_t clipped = 0;
};

GroupResult evaluate_group(const ActionLogits& logits, const ActionLogits& init_logits, const StateGroup& group,
                           const std::vector<PpoSample>& samples, const SimConfig& cfg) {
  GroupResult r;
  const auto logp = log_softmax(logits);
  ActionProbs probs{};
  for (std::size_t a = 0; a < kNumActions; ++a) probs[a] = std::exp(logp[a]);
  const auto n = static_cast<double>(group.sample_indices.size());

  for (std::size_t idx : group.sample_indices) {
    const auto& s = samples[idx];
    const auto a = static_cast<std::size_t>(s.action);
    const double ratio = std::exp(logp[a] - s.old_logprob);
    r.surrogate += clipped_term(ratio, s.advantage, cfg.clip_eps);
    r.ratio_sum += ratio;
    if (unclipped_active(ratio, s.advantage, cfg.clip_eps)) {
      // d ratio / d z_b = ratio * (1[a == b] - pi_b)
      for (std::size_t b = 0; b < kNumActions; ++b) {
        r.grad[b] += s.advantage * ratio * ((a == b ? 1.0 : 0.0) - probs[b]);
      }
    } else {
      ++r.clipped;
    }
  }

  const auto log_q = log_softmax(init_logits);
  double h = 0.0;
  double kl = 0.0;
  for (std::size_t b = 0; b < kNumActions; ++b) {
    h -= probs[b] * logp[b];
    kl += probs[b] * (logp[b] - log_q[b]);
  }
  r.entropy = h;
  r.kl = kl;
  for (std::size_t b = 0; b < kNumActions; ++b) {
    const double d_entropy = -probs[b] * (logp[b] + h);
    const double d_kl = probs[b] * ((logp[b] - log_q[b]) - kl);
    r.grad[b] += n * (cfg.entropy_coef * d_entropy - cfg.kl_coef * d_kl);
  }
  r.objective = r.surrogate + n * (cfg.entropy_coef * h - cfg.kl_coef * kl);
  return r;
}

}  // namespace

double surrogate_objective(const PolicyParams& policy, const PolicyParams& initial,
                           const std::vector<PpoSample>& samples, const SimConfig& cfg) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& g : group_by_state(samples)) {
    total += evaluate_group(policy.logits(g.state), initial.logits(g.state), g, samples, cfg).objective;
  }
  return total / static_cast<double>(samples.size());
}

PolicyGradient surrogate_gradient(const PolicyParams& policy, const PolicyParams& initial,
                                  const std::vector<PpoSample>& samples, const SimConfig& cfg) {
  PolicyGradient grad;
  grad.table.assign(policy.table.size(), ActionLogits{});
  if (samples.empty()) return grad;
  const auto N = static_cast<double>(samples.size());
  for (const auto& g : group_by_state(samples)) {
    const auto r = evaluate_group(policy.logits(g.state), initial.logits(g.state), g, samples, cfg);
    for (std::size_t b = 0; b < kNumActions; ++b) {
      grad.table[g.state][b] = r.grad[b] / N;
      grad.shared[b] += r.grad[b] / N;
    }
  }
  return grad;
}

UpdateStats ppo_update(PolicyParams& policy, const PolicyParams& initial, const std::vector<PpoSample>& samples,
                       const SimConfig& cfg) {
  UpdateStats stats;
  const auto groups = group_by_state(samples);
  stats.states_updated = groups.size();
  if (samples.empty()) return stats;
  const auto N = static_cast<double>(samples.size());

  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    std::vector<GroupResult> results;
    results.reserve(groups.size());
    for (const auto& g : groups) {
      results.push_back(evaluate_group(policy.logits(g.state), initial.logits(g.state), g, samples, cfg));
    }
    ActionLogits shared_grad{};
    double surrogate = 0.0, ent = 0.0, kl = 0.0, ratio_sum = 0.0;
    std::size_t clipped = 0;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const auto& r = results[k];
      const auto n = static_cast<double>(groups[k].sample_indices.size());
      auto& row = policy.table[groups[k].state];
      for (std::size_t b = 0; b < kNumActions; ++b) {
        row[b] += cfg.actor_step * r.grad[b] / n;
        shared_grad[b] += r.grad[b] / N;
      }
      surrogate += r.surrogate;
      ent += n * r.entropy;
      kl += n * r.kl;
      ratio_sum += r.ratio_sum;
      clipped += r.clipped;
    }
    for (std::size_t b = 0; b < kNumActions; ++b) policy.shared[b] += cfg.shared_step * shared_grad[b];
    if (epoch == 0) {
      stats.surrogate = surrogate / N;
      stats.entropy = ent / N;
      stats.kl = kl / N;
      stats.mean_ratio = ratio_sum / N;
      stats.clip_fraction = static_cast<double>(clipped) / N;
    }
  }

  double value_loss = 0.0;
  for (const auto& g : groups) {
    double& v = policy.values[g.state];
    double mean_error = 0.0;
    for (std::size_t idx : g.sample_indices) {
      const double err = samples[idx].return_target - v;
      mean_error += err;
      value_loss += err * err;
    }
    mean_error /= static_cast<double>(g.sample_indices.size());
    v += cfg.critic_step * mean_error;
  }
  stats.value_loss = value_loss / N;
  return stats;
}

std::vector<EpisodeTrace> rollout_batch(const PolicyParams& policy, const SimConfig& cfg, std::size_t iteration) {
  std::vector<EpisodeTrace> episodes(cfg.episodes_per_iteration);
  parallel_for(episodes.size(), cfg.workers, [&](std::size_t i) {
    Rng rng(episode_seed(cfg.seed, iteration, i));
    episodes[i] = rollout(policy, cfg, rng);
  });
  return episodes;
}

namespace {

double percentile(std::vector<long> sorted, double q) {
  if (sorted.empty()) return 0.0;
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return static_cast<double>(sorted[lo]) * (1.0 - frac) + static_cast<double>(sorted[hi]) * frac;
}

}  // namespace

IterationStats summarize(std::size_t iter, const std::vector<EpisodeTrace>& episodes, const PolicyParams& policy,
                         const PolicyParams& initial, const SimConfig& cfg) {
  (void)cfg;
  IterationStats st;
  st.iter = iter;
  if (episodes.empty()) return st;
  std::vector<long> lengths;
  std::size_t correct = 0, exceeded = 0, actions = 0, repeats = 0, branches = 0;
  std::vector<std::size_t> visited;
  for (const auto& ep : episodes) {
    lengths.push_back(ep.total_length);
    correct += ep.outcome == Outcome::Correct ? 1 : 0;
    exceeded += ep.outcome == Outcome::Exceeded ? 1 : 0;
    for (const auto& s : ep.steps) {
      ++actions;
      repeats += s.action == Action::Repeat ? 1 : 0;
      branches += s.action == Action::Branch ? 1 : 0;
      visited.push_back(s.state);
    }
  }
  const auto n = static_cast<double>(episodes.size());
  st.accuracy = static_cast<double>(correct) / n;
  st.exceed_rate = static_cast<double>(exceeded) / n;
  st.mean_len = static_cast<double>(std::accumulate(lengths.begin(), lengths.end(), 0L)) / n;
  st.len_p50 = percentile(lengths, 0.5);
  st.len_p90 = percentile(lengths, 0.9);
  if (actions > 0) {
    st.repeat_freq = static_cast<double>(repeats) / static_cast<double>(actions);
    st.branch_freq = static_cast<double>(branches) / static_cast<double>(actions);
  }
  std::sort(visited.begin(), visited.end());
  visited.erase(std::unique(visited.begin(), visited.end()), visited.end());
  double kl = 0.0;
  for (std::size_t s : visited) kl += kl_divergence(policy.logits(s), initial.logits(s));
  st.kl = visited.empty() ? 0.0 : kl / static_cast<double>(visited.size());
  return st;
}

std::vector<IterationStats> run_experiment(const SimConfig& cfg,
                                           const std::function<void(const IterationStats&)>& on_iteration) {
  cfg.check();
  PolicyParams policy = PolicyParams::initial(cfg);
  const PolicyParams initial = policy;
  std::vector<IterationStats> out;
  out.reserve(cfg.iterations + 1);
  for (std::size_t iter = 0;; ++iter) {
    const auto episodes = rollout_batch(policy, cfg, iter);
    out.push_back(summarize(iter, episodes, policy, initial, cfg));
    if (on_iteration) on_iteration(out.back());
    if (iter == cfg.iterations) break;
    const auto samples = build_samples(episodes, policy, cfg);
    ppo_update(policy, initial, samples, cfg);
  }
  return out;
}

}  // namespace cotforge::sim
