// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cotforge/advantage.hpp"
#include "cotforge/cli.hpp"
#include "cotforge/config.hpp"
#include "cotforge/corpus.hpp"
#include "cotforge/jsonl.hpp"
#include "cotforge/orchestrator.hpp"
#include "cotforge/repetition.hpp"
#include "cotforge/reward.hpp"
#include "cotforge/simulator.hpp"
#include "cotforge/verifier.hpp"
#include "oracles.hpp"

using namespace cotforge;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool ok = true;
  std::ostringstream detail;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string& name, double limit_s, const std::function<void(Verdict&)>& body) {
  Verdict v;
  const auto t0 = Clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.ok = false;
    v.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (secs >= limit_s) {
    v.ok = false;
    v.detail << " [over time limit " << limit_s << " s]";
  }
  if (!v.ok) ++failures;
  std::cout << (v.ok ? "PASS" : "FAIL") << " " << std::setw(2) << id << " " << name << " (" << std::fixed
            << std::setprecision(2) << secs << " s)" << std::defaultfloat << std::setprecision(6) << v.detail.str()
            << std::endl;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- 1

void cosine_exactness(Verdict& v) {
  const auto cfg = preset("default", 1000);
  const struct {
    bool correct;
    long len;
    double want;
  } cases[] = {{true, 0, 2.0}, {true, 500, 1.5}, {false, 500, -5.0}, {true, 1000, -10.0}, {false, 1000, -10.0}};
  double worst = 0.0;
  for (const auto& c : cases) {
    const double got = cosine_reward(c.correct, c.len, cfg);
    worst = std::max(worst, std::abs(got - c.want));
    v.require(std::abs(got - c.want) < 1e-12, "reward(" + std::to_string(c.correct) + "," + std::to_string(c.len) + ")");
  }
  v.detail << " max err " << worst;
}

// ---- 2

void ordering(Verdict& v) {
  const auto cfg = preset("default");
  std::mt19937_64 rng(2024);
  std::vector<long> lengths(10000);
  for (auto& L : lengths) L = static_cast<long>(rng() % static_cast<unsigned long>(cfg.max_length));
  std::sort(lengths.begin(), lengths.end());
  bool above = true, shorter_correct = true, shorter_wrong = true;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const long L = lengths[i];
    above = above && cosine_reward(true, L, cfg) > cosine_reward(false, L, cfg);
    if (i > 0 && lengths[i - 1] < L) {
      shorter_correct = shorter_correct && cosine_reward(true, lengths[i - 1], cfg) > cosine_reward(true, L, cfg);
      shorter_wrong = shorter_wrong && cosine_reward(false, lengths[i - 1], cfg) < cosine_reward(false, L, cfg);
    }
  }
  v.require(above, "correct above wrong");
  v.require(shorter_correct, "shorter correct preferred");
  v.require(shorter_wrong, "shorter wrong penalized more");
  v.require(validate_config(cfg).empty(), "default preset warns");

  const auto warnings = validate_config(preset("reward_a"));
  std::set<OrderingConstraint> kinds;
  for (const auto& w : warnings) kinds.insert(w.constraint);
  v.detail << " reward_a warnings:";
  for (const auto& w : warnings) v.detail << " {" << w.message << "}";
  v.require(kinds.count(OrderingConstraint::ShorterCorrectBetter) == 1, "reward_a lacks the r0c<rLc warning");
  v.require(warnings.size() == 1, "reward_a must trigger only the r0c<rLc warning");
}

// ---- 3

void repetition_oracle(Verdict& v) {
  const auto hand = ngram_repetition_penalty(TokenSequence::whole({7, 8, 7, 8, 7, 8}), 2, -0.05).values;
  v.require(hand == std::vector<double>{0, 0, -0.05, -0.05, -0.05, -0.05}, "hand trace");
  std::mt19937_64 rng(3);
  const std::uint32_t alphabets[] = {2, 16, 1024};
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::uint32_t alpha = alphabets[i % 3];
    const std::size_t len = 1 + rng() % 256;
    std::vector<TokenId> t(len);
    for (auto& x : t) x = static_cast<TokenId>(rng() % alpha);
    const std::size_t active = 1 + rng() % len;
    const std::size_t n = 1 + rng() % 8;
    const TokenSequence seq{t, active, len};
    if (ngram_repetition_penalty(seq, n, -0.05).values != oracle::brute_penalty(t, active, len, n, -0.05)) ++mismatches;
  }
  v.detail << " mismatches " << mismatches << "/1000";
  v.require(mismatches == 0, "oracle mismatch");
}

// ---- 4

void advantage_oracle(Verdict& v) {
  std::mt19937_64 rng(4);
  const double gammas[] = {0.0, 0.99, 0.999, 1.0};
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  double worst = 0.0;
  double gae_worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t T = 1 + rng() % 64;
    const std::size_t M = 1 + rng() % 3;
    std::vector<ChannelTrace> ch(M);
    std::vector<oracle::Channel> och(M);
    for (std::size_t m = 0; m < M; ++m) {
      ch[m].gamma = och[m].gamma = gammas[rng() % 4];
      for (std::size_t t = 0; t < T; ++t) ch[m].rewards.push_back(U(rng));
      och[m].rewards = ch[m].rewards;
    }
    std::vector<double> values(T);
    for (auto& x : values) x = U(rng);
    const auto got = multi_channel_advantage(ch, values);
    const auto want = oracle::brute_advantage(och, values);
    for (std::size_t t = 0; t < T; ++t) worst = std::max(worst, std::abs(got[t] - want[t]));

    if (ch[0].gamma > 0.0) {  // gae_single takes gamma in (0, 1]
      std::vector<ChannelTrace> one{ch[0]};
      const auto gae = gae_single(ch[0].rewards, values, ch[0].gamma, 1.0);
      const auto multi = multi_channel_advantage(one, values);
      for (std::size_t t = 0; t < T; ++t) gae_worst = std::max(gae_worst, std::abs(gae[t] - multi[t]));
    }
  }
  v.detail << " max abs diff " << worst << ", gae(lambda=1) vs single channel " << gae_worst;
  v.require(worst < 1e-9, "double-sum oracle");
  v.require(gae_worst < 1e-9, "gae(lambda=1) differs from the single-channel estimator");
}

// ---- 5

void grader_suite(Verdict& v) {
  const auto table = io::read_jsonl_file(std::string(COTFORGE_TEST_DATA_DIR) + "/grader_cases.jsonl");
  v.require(table.warnings.empty(), "malformed table line");
  std::size_t passed = 0;
  for (const auto& c : table.records) {
    const auto label = grade(c.at("response").get<std::string>(), c.at("gold").get<std::string>());
    if (to_string(label) == c.at("expected").get<std::string>()) {
      ++passed;
    } else {
      v.detail << " [case " << c.dump() << " -> " << to_string(label) << "]";
    }
  }
  v.detail << " table " << passed << "/" << table.records.size();
  v.require(table.records.size() >= 60, "fewer than 60 cases");
  v.require(passed == table.records.size(), "table");

  std::mt19937_64 rng(5);
  struct Q {
    long long n, d;
  };
  std::vector<Q> qs;
  for (int i = 0; i < 5000; ++i) qs.push_back({static_cast<long long>(rng() % 201) - 100, 1 + static_cast<long long>(rng() % 60)});
  auto spell = [&](const Q& q) {
    const long long k = 1 + static_cast<long long>(rng() % 3);
    switch (rng() % 3) {
      case 0:
        return std::to_string(q.n * k) + "/" + std::to_string(q.d * k);
      case 1:
        return std::string(q.n < 0 ? "-" : "") + "\\frac{" + std::to_string(std::llabs(q.n) * k) + "}{" +
               std::to_string(q.d * k) + "}";
      default:
        return "$" + std::to_string(q.n) + "/" + std::to_string(q.d) + "$";
    }
  };
  bool consistent = true, reflexive = true, symmetric = true, transitive = true;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const Q& a = qs[i];
    const Q& b = rng() % 4 == 0 ? a : qs[rng() % qs.size()];
    const Q& c = rng() % 4 == 0 ? b : qs[rng() % qs.size()];
    const auto sa = spell(a), sb = spell(b), sc = spell(c);
    const bool ab = answers_equal(sa, sb);
    reflexive = reflexive && answers_equal(sa, sa);
    symmetric = symmetric && ab == answers_equal(sb, sa);
    if (ab && answers_equal(sb, sc)) transitive = transitive && answers_equal(sa, sc);
    consistent = consistent && ab == oracle::same_rational(std::to_string(a.n) + "/" + std::to_string(a.d),
                                                            std::to_string(b.n) + "/" + std::to_string(b.d));
  }
  v.require(reflexive, "reflexivity");
  v.require(symmetric, "symmetry");
  v.require(transitive, "transitivity");
  v.require(consistent, "agreement with exact rational arithmetic");
}

// ---- 6

std::string numbered_words(std::size_t begin, std::size_t end, const std::string& prefix) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += prefix + std::to_string(i);
  }
  return out;
}

void minhash_stats(Verdict& v) {
  const auto A = make_shingles("alpha beta", 1), B = make_shingles("beta gamma", 1);
  v.require(std::abs(exact_jaccard(A, B) - 1.0 / 3.0) < 1e-15, "fixture jaccard");
  int within = 0;
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto sa = minhash_from_shingles(A.shingles, 512, seed);
    const auto sb = minhash_from_shingles(B.shingles, 512, seed);
    const double e = jaccard_estimate(sa, sb);
    sum += e;
    within += std::abs(e - 1.0 / 3.0) <= 0.15 ? 1 : 0;
  }
  const double mean = sum / 200.0;
  v.detail << " within " << within << "/200, mean " << mean;
  v.require(within >= 198, "per-seed spread");
  v.require(std::abs(mean - 1.0 / 3.0) <= 0.05, "seed average");

  // 190 shingles each, 10 replaced: exact Jaccard 180/200.
  const std::string a = numbered_words(0, 194, "w");
  const std::string b = numbered_words(0, 184, "w") + " " + numbered_words(184, 194, "v");
  const double j = exact_jaccard(make_shingles(a, 5), make_shingles(b, 5));
  int together = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DedupParams p;
    p.bands = 16;
    p.rows = 8;
    p.num_hashes = 128;
    p.threshold = 0.8;
    p.seed = seed;
    together += lsh_dedup({{"a", a}, {"b", b}}, p).size() == 1 ? 1 : 0;
  }
  v.detail << "; lsh pair J=" << j << " clustered " << together << "/100";
  v.require(std::abs(j - 0.9) < 1e-12, "lsh fixture jaccard");
  v.require(together >= 99, "lsh clustering");
}

// ---- 7

void gradient_check(Verdict& v) {
  using namespace sim;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N(0.0, 0.7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  SimConfig cfg;
  cfg.kl_coef = 0.05;
  cfg.entropy_coef = 0.02;
  const std::size_t S = 8;
  auto make = [&] {
    PolicyParams p;
    p.table.assign(S, ActionLogits{});
    p.values.assign(S, 0.0);
    for (auto& row : p.table) {
      for (double& x : row) x = N(rng);
    }
    for (double& x : p.shared) x = N(rng);
    return p;
  };
  auto policy = make();
  const auto initial = make();
  // frozen batch; ratios spread on both sides of the clip range
  std::vector<PpoSample> batch;
  while (batch.size() < 128) {
    PpoSample s;
    s.state = rng() % S;
    s.action = static_cast<Action>(rng() % kNumActions);
    s.advantage = 2.0 * U(rng);
    const double ratio = std::exp(0.6 * U(rng));
    if (std::abs(ratio - (1.0 + cfg.clip_eps)) < 0.02 || std::abs(ratio - (1.0 - cfg.clip_eps)) < 0.02) continue;
    s.old_logprob = std::log(softmax(policy.logits(s.state))[static_cast<std::size_t>(s.action)]) - std::log(ratio);
    batch.push_back(s);
  }
  const auto g = surrogate_gradient(policy, initial, batch, cfg);
  const double h = 1e-6;
  double num = 0.0, den = 0.0;
  auto probe = [&](double& x, double analytic) {
    const double saved = x;
    x = saved + h;
    const double up = surrogate_objective(policy, initial, batch, cfg);
    x = saved - h;
    const double down = surrogate_objective(policy, initial, batch, cfg);
    x = saved;
    const double fd = (up - down) / (2.0 * h);
    num += (fd - analytic) * (fd - analytic);
    den += std::max(fd * fd, analytic * analytic);
  };
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < kNumActions; ++a) probe(policy.table[s][a], g.table[s][a]);
  }
  for (std::size_t a = 0; a < kNumActions; ++a) probe(policy.shared[a], g.shared[a]);
  const double rel = std::sqrt(num / den);
  v.detail << " relative error " << rel;
  v.require(rel < 1e-4, "relative error");
}

// ---- 8

constexpr std::size_t kTail = 10;  // "final" = mean of the last kTail iterations

double tail_mean(const std::vector<sim::IterationStats>& s, double sim::IterationStats::*field) {
  double sum = 0.0;
  for (std::size_t i = s.size() - kTail; i < s.size(); ++i) sum += s[i].*field;
  return sum / static_cast<double>(kTail);
}

// Standard deviation of successive differences of mean length.
double length_jitter(const std::vector<sim::IterationStats>& s) {
  std::vector<double> d;
  for (std::size_t i = 1; i < s.size(); ++i) d.push_back(s[i].mean_len - s[i - 1].mean_len);
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(d.size() - 1));
}

struct RunCache {
  std::map<std::pair<std::string, std::uint64_t>, std::vector<sim::IterationStats>> runs;
  double slowest = 0.0;

  const std::vector<sim::IterationStats>& get(const std::string& preset, std::uint64_t seed) {
    auto key = std::make_pair(preset, seed);
    if (auto it = runs.find(key); it != runs.end()) return it->second;
    auto plan = load_sim_plan(cli::data_dir() + "/presets/" + preset + ".json");
    auto cfg = plan.at(0).config;
    cfg.seed = seed;
    const auto t0 = Clock::now();
    auto stats = sim::run_experiment(cfg);
    slowest = std::max(slowest, std::chrono::duration<double>(Clock::now() - t0).count());
    return runs.emplace(key, std::move(stats)).first->second;
  }
};

void dynamics(Verdict& v) {
  RunCache cache;
  const std::uint64_t seeds[] = {1, 2, 3, 4, 5};
  int a_ok = 0, b_ok = 0, c_ok = 0, d_ok = 0;
  std::ostringstream sa, sb, sc, sd;
  for (auto seed : seeds) {
    const auto& classic = cache.get("classic", seed);
    const auto& cosine = cache.get("cosine-default", seed);
    const double ex_classic = tail_mean(classic, &sim::IterationStats::exceed_rate);
    const double ex_cosine = tail_mean(cosine, &sim::IterationStats::exceed_rate);
    const double jit_classic = length_jitter(classic), jit_cosine = length_jitter(cosine);
    a_ok += (ex_classic > ex_cosine && jit_cosine < jit_classic) ? 1 : 0;
    sa << " s" << seed << ":exceed " << ex_classic << ">" << ex_cosine << ",jitter " << jit_cosine << "<" << jit_classic;

    const auto& ra = cache.get("cosine-a", seed);
    const double init_len = ra.front().mean_len, final_len = tail_mean(ra, &sim::IterationStats::mean_len);
    const double ex_a = tail_mean(ra, &sim::IterationStats::exceed_rate);
    b_ok += (final_len >= 2.0 * init_len && ex_a >= 0.5) ? 1 : 0;
    sb << " s" << seed << ":len " << init_len << "->" << final_len << ",exceed " << ex_a;

    const double len_b = tail_mean(cache.get("cosine-b", seed), &sim::IterationStats::mean_len);
    const double len_c = tail_mean(cache.get("cosine-c", seed), &sim::IterationStats::mean_len);
    c_ok += len_c >= len_b ? 1 : 0;
    sc << " s" << seed << ":c " << len_c << " b " << len_b;

    const double rep_on = tail_mean(cache.get("cosine-rep-on", seed), &sim::IterationStats::repeat_freq);
    const double rep_off = tail_mean(cache.get("cosine-rep-off", seed), &sim::IterationStats::repeat_freq);
    d_ok += rep_on <= 0.5 * rep_off ? 1 : 0;
    sd << " s" << seed << ":on " << rep_on << " off " << rep_off;
  }
  v.detail << "\n     8a classic vs cosine " << a_ok << "/5" << sa.str() << "\n     8b reward_a explosion " << b_ok
           << "/5" << sb.str() << "\n     8c risk aversion " << c_ok << "/5" << sc.str()
           << "\n     8d repetition mitigation " << d_ok << "/5" << sd.str() << "\n     slowest run "
           << cache.slowest << " s";
  v.require(a_ok >= 4, "8a");
  v.require(b_ok >= 4, "8b");
  v.require(c_ok >= 4, "8c");
  v.require(d_ok >= 4, "8d");
  v.require(cache.slowest <= 120.0, "a run took over 2 min");
}

// ---- 9

void action_machine(Verdict& v) {
  using namespace llm;
  MockClient mock({"<goal>Sum the roots</goal><clarification>We need x1 + x2.</clarification>",
                   "<sentence>Factor the quadratic.</sentence>", "(x-2)(x-3) = 0, roots 2 and 3.",
                   "<verification>Both roots satisfy the equation.</verification>"
                   "<current_goal_achieved>true</current_goal_achieved><parent_goal_achieved>true</parent_goal_achieved>",
                   "The sum is \\boxed{5}."});
  const auto log = run_action_machine("Find the sum of the roots of x^2 - 5x + 6 = 0.", mock);
  const ActionKind order[] = {ActionKind::Clarify, ActionKind::Decompose, ActionKind::SolutionStep,
                              ActionKind::Reflection, ActionKind::Answer};
  bool ordered = log.thoughts.size() == 5;
  for (std::size_t i = 0; ordered && i < 5; ++i) ordered = log.thoughts[i].action == order[i] && !log.thoughts[i].forced;
  v.detail << " thoughts " << log.thoughts.size();
  v.require(log.terminal, "not terminal");
  v.require(ordered, "five thoughts in action order");

  const std::string dir = COTFORGE_GOLDEN_DIR;
  const std::pair<std::string, std::string> rendered[] = {
      {"model_verifier", fill_template(templates::model_verifier(), {{"out", "Line A\nSo the answer is \\boxed{3/4}."},
                                                                     {"ref", "The answer is 0.75."}})},
      {"answer_extraction", fill_template(templates::answer_extraction(),
                                          {{"Problem", "What is 1/2 + 1/4?"}, {"Solution", "Adding gives 3/4."}})},
      {"action_clarify",
       fill_template(templates::action_clarify(), {{"goal", "Find the sum of the roots of x^2 - 5x + 6 = 0."}})},
      {"action_decompose", fill_template(templates::action_decompose(), {{"parent_goal", "Find the sum of the roots."},
                                                                         {"current_goal", "Factor the quadratic."},
                                                                         {"solution", "We need the roots."}})},
      {"action_solution_step",
       fill_template(templates::action_solution_step(), {{"current_goal", "Factor the quadratic."},
                                                         {"prior_step", "We look for two numbers."},
                                                         {"solution", "We need the roots."}})},
      {"action_reflection",
       fill_template(templates::action_reflection(),
                     {{"parent_goal.target", "Find the sum of the roots."},
                      {"parent_goal_tree", "- Find the sum of the roots. [open]"},
                      {"parent_goal", "<parent goal>\nFind the sum of the roots.\n</parent goal>"},
                      {"current_goal", "Factor the quadratic."},
                      {"solution", "(x-2)(x-3)=0."}})},
      {"action_answer", fill_template(templates::action_answer(),
                                      {{"solution", "The roots are 2 and 3, so the sum is 5."},
                                       {"format", "Put the final answer in \\boxed{}."}})},
  };
  int matched = 0;
  for (const auto& [name, text] : rendered) {
    if (read_file(dir + "/" + name + ".txt") == text) {
      ++matched;
    } else {
      v.detail << " [golden mismatch: " << name << "]";
    }
  }
  v.detail << ", goldens " << matched << "/7";
  v.require(matched == 7, "golden templates");
}

// ---- 10

std::string simulate(const std::vector<std::string>& extra) {
  std::vector<std::string> args{"cotforge", "simulate", "--preset", "cosine-rep-on", "--seed", "42"};
  args.insert(args.end(), extra.begin(), extra.end());
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) throw std::runtime_error("simulate exited " + std::to_string(code) + ": " + err.str());
  return out.str();
}

void determinism(Verdict& v) {
  const auto a = simulate({"--workers", "1"});
  const auto b = simulate({"--workers", "1"});
  const auto c = simulate({"--workers", "4"});
  v.detail << " " << std::count(a.begin(), a.end(), '\n') << " stats lines, " << a.size() << " bytes";
  v.require(!a.empty(), "no output");
  v.require(a == b, "rerun differs");
  v.require(a == c, "worker count changes output");
}

}  // namespace

int main() {
  report(1, "cosine reward exactness", 1.0, cosine_exactness);
  report(2, "ordering constraints", 1.0, ordering);
  report(3, "repetition penalty oracle", 5.0, repetition_oracle);
  report(4, "multi-discount advantage oracle", 5.0, advantage_oracle);
  report(5, "grader suite", 5.0, grader_suite);
  report(6, "minhash statistics", 30.0, minhash_stats);
  report(7, "surrogate gradient check", 5.0, gradient_check);
  report(8, "qualitative dynamics", 3600.0, dynamics);
  report(9, "action machine conformance", 1.0, action_machine);
  report(10, "simulate determinism", 240.0, determinism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
