#include "cotforge/repetition.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace cotforge {

TokenSequence TokenSequence::whole(std::vector<TokenId> tokens) {
  TokenSequence seq;
  seq.active_length = tokens.size();
  seq.max_length = tokens.size();
  seq.tokens = std::move(tokens);
  return seq;
}

void TokenSequence::check() const {
  if (active_length == 0) throw std::invalid_argument("token sequence: active length must be >= 1");
  if (active_length > max_length) throw std::invalid_argument("token sequence: active length exceeds max length");
  if (active_length > tokens.size()) throw std::invalid_argument("token sequence: active length exceeds token count");
}

namespace {

// Start positions of windows whose n-gram occurred at an earlier start.
// Rolling polynomial hash buckets, with exact comparison inside a bucket.
std::vector<std::size_t> repeated_window_starts(std::span<const TokenId> seq, std::size_t n) {
  std::vector<std::size_t> repeats;
  if (n == 0 || n > seq.size()) return repeats;

  constexpr std::uint64_t kBase = 0x100000001b3ULL;
  std::uint64_t top = 1;  // kBase^(n-1)
  for (std::size_t i = 1; i < n; ++i) top *= kBase;

  std::uint64_t h = 0;
  for (std::size_t i = 0; i < n; ++i) h = h * kBase + (static_cast<std::uint64_t>(seq[i]) + 1);

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
  const std::size_t windows = seq.size() - n + 1;
  seen.reserve(windows);
  for (std::size_t j = 0; j < windows; ++j) {
    if (j > 0) {
      h -= (static_cast<std::uint64_t>(seq[j - 1]) + 1) * top;
      h = h * kBase + (static_cast<std::uint64_t>(seq[j + n - 1]) + 1);
    }
    auto& bucket = seen[h];
    const auto window = seq.subspan(j, n);
    const bool repeat = std::any_of(bucket.begin(), bucket.end(), [&](std::size_t start) {
      return std::equal(window.begin(), window.end(), seq.begin() + static_cast<std::ptrdiff_t>(start));
    });
    if (repeat) {
      repeats.push_back(j);
    } else {
      bucket.push_back(j);
    }
  }
  return repeats;
}

}  // namespace

PenaltyVector ngram_repetition_penalty(const TokenSequence& seq, std::size_t n, double penalty) {
  seq.check();
  if (n == 0) throw std::invalid_argument("n-gram size must be >= 1");
  PenaltyVector out;
  out.values.assign(seq.max_length, 0.0);
  const std::span<const TokenId> active(seq.tokens.data(), seq.active_length);
  for (std::size_t j : repeated_window_starts(active, n)) {
    std::fill_n(out.values.begin() + static_cast<std::ptrdiff_t>(j), n, penalty);
  }
  return out;
}

RepetitionStats repetition_stats(const TokenSequence& seq, std::size_t n) {
  seq.check();
  if (n == 0) throw std::invalid_argument("n-gram size must be >= 1");
  const std::span<const TokenId> active(seq.tokens.data(), seq.active_length);
  const auto repeats = repeated_window_starts(active, n);
  std::vector<bool> covered(seq.active_length, false);
  for (std::size_t j : repeats) std::fill_n(covered.begin() + static_cast<std::ptrdiff_t>(j), n, true);
  RepetitionStats stats;
  stats.repeated_windows = repeats.size();
  stats.penalized_fraction = static_cast<double>(std::count(covered.begin(), covered.end(), true)) /
                             static_cast<double>(seq.active_length);
  return stats;
}

}  // namespace cotforge
