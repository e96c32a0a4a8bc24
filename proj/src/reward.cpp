#include "cotforge/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cotforge {

std::string_view to_string(CorrectnessLabel label) {
  switch (label) {
    case CorrectnessLabel::Correct:
      return "correct";
    case CorrectnessLabel::Wrong:
      return "wrong";
    case CorrectnessLabel::NoAnswer:
      return "no_answer";
  }
  return "no_answer";
}

CorrectnessLabel parse_label(std::string_view text) {
  if (text == "correct") return CorrectnessLabel::Correct;
  if (text == "wrong") return CorrectnessLabel::Wrong;
  if (text == "no_answer") return CorrectnessLabel::NoAnswer;
  throw std::invalid_argument("unknown correctness label: " + std::string(text));
}

void RewardConfig::check() const {
  if (max_length < 1) {
    throw std::invalid_argument("reward max_length must be >= 1");
  }
  for (double v : {r0_correct, rL_correct, r0_wrong, rL_wrong, exceed_penalty}) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("reward values must be finite");
    }
  }
}

double cos_interp(long t, long T, double start_value, double end_value) {
  if (T <= 0) throw std::domain_error("cos_interp: T must be positive");
  if (t < 0 || t > T) throw std::domain_error("cos_interp: t must lie in [0, T]");
  // Pin the endpoints so they are exact rather than off by cos() rounding.
  if (t == 0) return start_value;
  if (t == T) return end_value;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(T);
  return end_value + 0.5 * (start_value - end_value) * (1.0 + std::cos(phase));
}

double cosine_reward(bool correct, long gen_length, const RewardConfig& cfg) {
  cfg.check();
  if (gen_length < 0) throw std::invalid_argument("gen_length must be nonnegative");
  if (gen_length >= cfg.max_length) return cfg.exceed_penalty;
  return correct ? cos_interp(gen_length, cfg.max_length, cfg.r0_correct, cfg.rL_correct)
                 : cos_interp(gen_length, cfg.max_length, cfg.r0_wrong, cfg.rL_wrong);
}

double classic_reward(bool correct) noexcept { return correct ? 1.0 : 0.0; }

double three_way_reward(CorrectnessLabel label) noexcept {
  switch (label) {
    case CorrectnessLabel::Correct:
      return 1.0;
    case CorrectnessLabel::Wrong:
      return -0.5;
    case CorrectnessLabel::NoAnswer:
      return -1.0;
  }
  return -1.0;
}

RewardConfig preset(std::string_view name, long max_length) {
  RewardConfig cfg;
  cfg.max_length = max_length;
  if (name == "default") {
    cfg.r0_correct = 2.0;
    cfg.rL_correct = 1.0;
  } else if (name == "reward_a") {
    cfg.r0_correct = 0.0;
    cfg.rL_correct = 10.0;
    cfg.r0_wrong = 0.0;
    cfg.rL_wrong = 0.0;
  } else if (name == "reward_b") {
    cfg.r0_correct = 6.0;
    cfg.rL_correct = 5.0;
  } else if (name == "reward_c") {
    cfg.r0_correct = 10.0;
    cfg.rL_correct = 9.0;
  } else {
    throw std::out_of_range("unknown reward preset: " + std::string(name));
  }
  cfg.check();
  return cfg;
}

std::vector<std::string> preset_names() { return {"default", "reward_a", "reward_b", "reward_c"}; }

std::vector<ConfigWarning> validate_config(const RewardConfig& cfg) {
  std::vector<ConfigWarning> warnings;
  if (!(std::min(cfg.r0_correct, cfg.rL_correct) > std::max(cfg.r0_wrong, cfg.rL_wrong))) {
    warnings.push_back({OrderingConstraint::CorrectAboveWrong,
                        "correct rewards do not strictly dominate wrong rewards at every length"});
  }
  if (!(cfg.r0_correct > cfg.rL_correct)) {
    warnings.push_back({OrderingConstraint::ShorterCorrectBetter,
                        "r0_correct <= rL_correct: longer correct answers are not penalized"});
  }
  if (!(cfg.r0_wrong < cfg.rL_wrong)) {
    warnings.push_back({OrderingConstraint::ShorterWrongWorse,
                        "r0_wrong >= rL_wrong: short wrong answers are not penalized more"});
  }
  return warnings;
}

}  // namespace cotforge
