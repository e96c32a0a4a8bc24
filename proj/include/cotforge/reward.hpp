#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cotforge {

enum class CorrectnessLabel { Correct, Wrong, NoAnswer };

std::string_view to_string(CorrectnessLabel label);
// Accepts "correct", "wrong", "no_answer".
CorrectnessLabel parse_label(std::string_view text);

// Cosine-shaped, length-dependent reward parameters. Lengths count generated
// tokens only (prompt excluded).
struct RewardConfig {
  double r0_correct = 2.0;    // correct answer at length 0
  double rL_correct = 1.0;    // correct answer at max_length
  double r0_wrong = -10.0;
  double rL_wrong = 0.0;
  double exceed_penalty = -10.0;
  long max_length = 14336;

  // Throws std::invalid_argument when max_length < 1 or any value is not finite.
  void check() const;
};

inline constexpr long kDefaultMaxLength = 14336;

// Cosine interpolation from start_value (t = 0) to end_value (t = T):
//   end + (start - end) * (1 + cos(pi * t / T)) / 2
// Throws std::domain_error for T == 0 or t > T.
double cos_interp(long t, long T, double start_value, double end_value);

// Lengths >= max_length always map to exceed_penalty, whatever the correctness.
double cosine_reward(bool correct, long gen_length, const RewardConfig& cfg);

double classic_reward(bool correct) noexcept;

// +1 / -0.5 / -1 for correct / wrong / no answer.
double three_way_reward(CorrectnessLabel label) noexcept;

// Named presets: "default", "reward_a", "reward_b", "reward_c".
// Throws std::out_of_range for an unknown name.
RewardConfig preset(std::string_view name, long max_length = kDefaultMaxLength);

std::vector<std::string> preset_names();

enum class OrderingConstraint {
  CorrectAboveWrong,     // min(r0c, rLc) > max(r0w, rLw)
  ShorterCorrectBetter,  // r0c > rLc
  ShorterWrongWorse,     // r0w < rLw
};

struct ConfigWarning {
  OrderingConstraint constraint;
  std::string message;
};

// Ordering violations are reported, never rejected: some useful presets
// (reward_a) violate them on purpose.
std::vector<ConfigWarning> validate_config(const RewardConfig& cfg);

}  // namespace cotforge
