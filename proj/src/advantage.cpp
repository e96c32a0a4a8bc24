#include "cotforge/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace cotforge {

namespace {

void check_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

}  // namespace

std::vector<double> multi_channel_return(std::span<const ChannelTrace> channels) {
  if (channels.empty()) throw std::invalid_argument("at least one reward channel is required");
  const std::size_t T = channels.front().rewards.size();
  std::vector<double> total(T, 0.0);
  for (const auto& ch : channels) {
    if (ch.rewards.size() != T) throw std::invalid_argument("reward channels differ in length");
    if (!(ch.gamma >= 0.0 && ch.gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    check_finite(ch.rewards, "rewards");
    double running = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      running = ch.rewards[t] + ch.gamma * running;
      total[t] += running;
    }
  }
  return total;
}

AdvantageTrace multi_channel_advantage(std::span<const ChannelTrace> channels, std::span<const double> values) {
  if (channels.empty()) throw std::invalid_argument("at least one reward channel is required");
  if (channels.front().rewards.size() != values.size()) {
    throw std::invalid_argument("value trace length differs from reward length");
  }
  check_finite(values, "values");
  AdvantageTrace adv = multi_channel_return(channels);
  for (std::size_t t = 0; t < adv.size(); ++t) adv[t] -= values[t];
  return adv;
}

AdvantageTrace gae_single(std::span<const double> rewards, std::span<const double> values, double gamma,
                          double lambda) {
  if (rewards.size() != values.size()) throw std::invalid_argument("rewards and values differ in length");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in (0, 1]");
  check_finite(rewards, "rewards");
  check_finite(values, "values");
  const std::size_t T = rewards.size();
  AdvantageTrace adv(T, 0.0);
  double running = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double next_value = (t + 1 < T) ? values[t + 1] : 0.0;
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lambda * running;
    adv[t] = running;
  }
  return adv;
}

}  // namespace cotforge
