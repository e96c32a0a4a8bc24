#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numeric>
#include <random>

#include "cotforge/simulator.hpp"

using namespace cotforge;
using namespace cotforge::sim;

namespace {

SimConfig small_config() {
  SimConfig cfg;
  cfg.max_length = 128;
  cfg.episodes_per_iteration = 32;
  cfg.iterations = 5;
  return cfg;
}

PolicyParams random_policy(std::size_t states, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 0.7);
  PolicyParams p;
  p.table.assign(states, ActionLogits{});
  p.values.assign(states, 0.0);
  for (auto& row : p.table) {
    for (double& x : row) x = N(rng);
  }
  for (double& x : p.shared) x = N(rng);
  return p;
}

double logprob(const PolicyParams& p, std::size_t s, Action a) {
  const auto probs = softmax(p.logits(s));
  return std::log(probs[static_cast<std::size_t>(a)]);
}

EpisodeTrace make_trace(const std::vector<std::pair<Action, std::vector<TokenId>>>& steps, Outcome outcome) {
  EpisodeTrace t;
  for (const auto& [a, block] : steps) {
    Step s;
    s.action = a;
    s.block = block;
    t.total_length += static_cast<long>(block.size());
    t.steps.push_back(s);
  }
  t.outcome = outcome;
  return t;
}

std::vector<TokenId> fresh(TokenId from, std::size_t n) {
  std::vector<TokenId> b(n);
  std::iota(b.begin(), b.end(), from);
  return b;
}

}  // namespace

TEST_CASE("config validation") {
  SimConfig cfg;
  CHECK_NOTHROW(cfg.check());
  cfg.work_block = 0;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.reward = "nope";
  CHECK_THROWS(cfg.check());
  cfg = SimConfig{};
  cfg.gamma_correct = 1.5;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.shared_step = -1;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
}

TEST_CASE("state index is a bijection onto the table") {
  SimConfig cfg = small_config();
  std::vector<bool> hit(cfg.num_states(), false);
  for (int d = cfg.min_difficulty; d <= cfg.max_difficulty; ++d) {
    for (int p = 0; p <= cfg.progress_cap; ++p) {
      for (std::size_t s = 0; s <= cfg.max_steps(); ++s) {
        const auto i = state_index({d, p, s}, cfg);
        REQUIRE(i < hit.size());
        CHECK_FALSE(hit[i]);
        hit[i] = true;
      }
    }
  }
}

TEST_CASE("logistic correctness") {
  CHECK(correct_probability(13, 3, 1.0) > 0.9999);
  CHECK(correct_probability(3, 3, 1.0) == 0.5);
}

TEST_CASE("policy that always answers") {
  SimConfig cfg = small_config();
  auto p = PolicyParams::initial(cfg);
  p.shared = {-1e9, -1e9, -1e9, 0.0};
  Rng rng(1);
  auto t = rollout(p, cfg, rng);
  CHECK(t.total_length == cfg.answer_block);
  REQUIRE(t.steps.size() == 1);
  CHECK(t.steps[0].action == Action::Answer);
  CHECK(t.outcome != Outcome::Exceeded);
}

TEST_CASE("policy that never answers exceeds the cap") {
  SimConfig cfg = small_config();
  auto p = PolicyParams::initial(cfg);
  p.shared = {0.0, 0.0, 0.0, -1e9};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto t = rollout(p, cfg, rng);
    CHECK(t.outcome == Outcome::Exceeded);
    CHECK(t.total_length <= cfg.max_length);
    CHECK(t.steps.back().block.empty());
  }
}

TEST_CASE("rollout invariants") {
  SimConfig cfg = small_config();
  std::mt19937_64 g(2);
  auto p = random_policy(cfg.num_states(), g);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    auto t = rollout(p, cfg, rng);
    long total = 0;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto& s = t.steps[i];
      CHECK(s.obs.step == i);
      CHECK(s.state == state_index(s.obs, cfg));
      CHECK(std::abs(s.logprob - logprob(p, s.state, s.action)) < 1e-12);
      total += static_cast<long>(s.block.size());
      if (s.action == Action::Repeat && i > 0 && !s.block.empty()) CHECK(s.block == t.steps[i - 1].block);
    }
    CHECK(total == t.total_length);
    CHECK(t.total_length <= cfg.max_length);
    CHECK(t.difficulty >= cfg.min_difficulty);
    CHECK(t.difficulty <= cfg.max_difficulty);
    if (t.outcome != Outcome::Exceeded) CHECK(t.steps.back().action == Action::Answer);
  }
}

TEST_CASE("reward assignment") {
  SimConfig cfg;
  auto t = make_trace({{Action::Work, fresh(2, 8)}, {Action::Answer, fresh(10, 4)}}, Outcome::Correct);
  auto ch = assign_rewards(t, cfg);
  REQUIRE(ch.size() == 2);
  CHECK(ch[0].rewards == std::vector<double>{0.0, cosine_reward(true, 12, preset("default", cfg.max_length))});
  CHECK(ch[1].rewards == std::vector<double>{0.0, 0.0});
  CHECK(ch[0].gamma == cfg.gamma_correct);
  CHECK(ch[1].gamma == cfg.gamma_penalty);

  auto r = make_trace({{Action::Work, fresh(2, 8)}, {Action::Repeat, fresh(2, 8)}, {Action::Answer, fresh(10, 4)}},
                      Outcome::Wrong);
  auto rc = assign_rewards(r, cfg);
  CHECK(rc[1].rewards[0] == 0.0);
  CHECK(std::abs(rc[1].rewards[1] - cfg.repetition_p * 8) < 1e-12);
  CHECK(rc[1].rewards[2] == 0.0);

  cfg.repetition_penalty = false;
  CHECK(assign_rewards(r, cfg)[1].rewards == std::vector<double>{0.0, 0.0, 0.0});

  auto ex = make_trace({{Action::Work, fresh(2, 8)}, {Action::Work, {}}}, Outcome::Exceeded);
  CHECK(assign_rewards(ex, cfg)[0].rewards.back() == -10.0);

  cfg.reward = "classic";
  CHECK(assign_rewards(t, cfg)[0].rewards.back() == 1.0);
  CHECK(assign_rewards(ex, cfg)[0].rewards.back() == 0.0);
}

TEST_CASE("surrogate gradient matches central differences") {
  std::mt19937_64 rng(99);
  SimConfig cfg;
  cfg.kl_coef = 0.05;
  cfg.entropy_coef = 0.02;
  const std::size_t S = 6;
  auto policy = random_policy(S, rng);
  auto initial = random_policy(S, rng);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<PpoSample> samples;
  while (samples.size() < 60) {
    PpoSample x;
    x.state = rng() % S;
    x.action = static_cast<Action>(rng() % kNumActions);
    x.advantage = U(rng) * 2.0;
    // keep ratios away from the clip boundaries so the objective is smooth here
    const double ratio = std::exp(U(rng) * 0.6);
    if (std::abs(ratio - 1.2) < 0.02 || std::abs(ratio - 0.8) < 0.02) continue;
    x.old_logprob = logprob(policy, x.state, x.action) - std::log(ratio);
    samples.push_back(x);
  }
  const auto g = surrogate_gradient(policy, initial, samples, cfg);
  const double h = 1e-6;
  double num = 0.0, den = 0.0;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = surrogate_objective(policy, initial, samples, cfg);
    param = saved - h;
    const double down = surrogate_objective(policy, initial, samples, cfg);
    param = saved;
    const double fd = (up - down) / (2 * h);
    num += (fd - analytic) * (fd - analytic);
    den += std::max(fd * fd, analytic * analytic);
  };
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < kNumActions; ++a) probe(policy.table[s][a], g.table[s][a]);
  }
  for (std::size_t a = 0; a < kNumActions; ++a) probe(policy.shared[a], g.shared[a]);
  CHECK(std::sqrt(num / den) < 1e-4);
}

TEST_CASE("ppo update edge cases") {
  SimConfig cfg;
  cfg.entropy_coef = 0.0;
  std::mt19937_64 rng(5);
  auto policy = random_policy(4, rng);
  const auto initial = policy;
  std::vector<PpoSample> zero;
  for (std::size_t s = 0; s < 4; ++s) {
    zero.push_back({s, Action::Work, logprob(policy, s, Action::Work), 0.0, 1.0});
  }
  ppo_update(policy, initial, zero, cfg);
  CHECK(policy.table == initial.table);
  CHECK(policy.shared == initial.shared);
  CHECK(policy.values != initial.values);

  SimConfig frozen;
  frozen.actor_step = 0.0;
  frozen.shared_step = 0.0;
  auto p2 = initial;
  std::vector<PpoSample> pos{{1, Action::Branch, logprob(p2, 1, Action::Branch), 1.0, 2.0}};
  ppo_update(p2, initial, pos, frozen);
  CHECK(p2.table == initial.table);
  CHECK(p2.shared == initial.shared);
  CHECK(p2.values[1] == doctest::Approx(frozen.critic_step * 2.0));

  SimConfig one;
  one.entropy_coef = 0.0;
  one.kl_coef = 0.0;
  auto p3 = PolicyParams::initial(small_config());
  const auto p3_init = p3;
  std::vector<PpoSample> work{{0, Action::Work, logprob(p3, 0, Action::Work), 1.0, 1.0}};
  ppo_update(p3, p3_init, work, one);
  CHECK(p3.logits(0)[0] > p3_init.logits(0)[0]);
}

TEST_CASE("experiment runs are deterministic and start at zero kl") {
  SimConfig cfg = small_config();
  cfg.seed = 17;
  auto a = run_experiment(cfg);
  REQUIRE(a.size() == cfg.iterations + 1);
  CHECK(a[0].kl == 0.0);
  auto b = run_experiment(cfg);
  cfg.workers = 4;
  auto c = run_experiment(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mean_len == b[i].mean_len);
    CHECK(a[i].mean_len == c[i].mean_len);
    CHECK(a[i].kl == c[i].kl);
    CHECK(a[i].accuracy == c[i].accuracy);
  }
  cfg.iterations = 0;
  CHECK(run_experiment(cfg).size() == 1);
}
