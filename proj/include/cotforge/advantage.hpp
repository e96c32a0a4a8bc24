#pragma once

#include <span>
#include <vector>

namespace cotforge {

// One reward channel of an episode: per-timestep rewards and the channel's discount.
struct ChannelTrace {
  std::vector<double> rewards;
  double gamma = 1.0;
};

using ValueTrace = std::vector<double>;      // V(s_t) per timestep
using AdvantageTrace = std::vector<double>;  // A_t per timestep

// A_t = sum_{l >= 0} sum_m gamma_m^l r_{m,t+l} - V(s_t), summed to the end of the
// episode (lambda = 1, no bootstrap past the last step).
// Throws std::invalid_argument on an empty channel list, length mismatch, a
// gamma outside [0, 1] or non-finite inputs.
AdvantageTrace multi_channel_advantage(std::span<const ChannelTrace> channels, std::span<const double> values);

// Per-timestep discounted return sum_m sum_l gamma_m^l r_{m,t+l}.
std::vector<double> multi_channel_return(std::span<const ChannelTrace> channels);

// Standard single-channel GAE(lambda) with V beyond the episode end taken as 0.
AdvantageTrace gae_single(std::span<const double> rewards, std::span<const double> values, double gamma,
                          double lambda);

}  // namespace cotforge
