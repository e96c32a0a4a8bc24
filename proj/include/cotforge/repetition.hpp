#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cotforge {

using TokenId = std::uint32_t;

// A token sequence of which only the first `active_length` tokens are scored,
// padded out to `max_length` in the output.
struct TokenSequence {
  std::vector<TokenId> tokens;
  std::size_t active_length = 0;
  std::size_t max_length = 0;

  // Whole sequence active, no padding.
  static TokenSequence whole(std::vector<TokenId> tokens);
  // Throws std::invalid_argument unless 1 <= active_length <= min(max_length, tokens.size()).
  void check() const;
};

// Per-position penalties; every entry is 0 or the penalty value.
struct PenaltyVector {
  std::vector<double> values;
};

// N-gram repetition penalty. Windows are scanned left to right; a window whose
// n-gram already started at an earlier position sets all of its positions to
// `penalty` (overwrite, never accumulate). First occurrences only register.
PenaltyVector ngram_repetition_penalty(const TokenSequence& seq, std::size_t n, double penalty);

struct RepetitionStats {
  std::size_t repeated_windows = 0;
  double penalized_fraction = 0.0;  // penalized positions / active_length
};

RepetitionStats repetition_stats(const TokenSequence& seq, std::size_t n);

}  // namespace cotforge
