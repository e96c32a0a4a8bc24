#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cotforge {

struct Response {
  std::string id;
  std::string text;
  std::size_t token_length = 0;
};

using ResponseBatch = std::vector<Response>;

// Reflection keywords tracked by default.
const std::vector<std::string>& default_keywords();

struct KeywordRate {
  std::string keyword;
  double contain_fraction = 0.0;  // share of responses with >= 1 occurrence
  double mean_count = 0.0;        // occurrences per response
};

struct KeywordReport {
  std::vector<KeywordRate> rates;  // in keyword order
};

// Non-overlapping, case-insensitive substring count.
std::size_t count_occurrences(std::string_view text, std::string_view needle);

// Throws std::invalid_argument for an empty keyword list. An empty batch
// reports zeros.
KeywordReport keyword_rates(const ResponseBatch& batch, const std::vector<std::string>& keywords);

// Occurrences of the pivot "alternatively," (comma included), case-insensitive.
std::size_t branching_frequency(std::string_view text);

inline constexpr std::string_view kCodeMarker = "```python";

// Share of responses containing the python code fence. Throws on an empty batch.
double coding_rate(const ResponseBatch& batch);

struct LengthStats {
  double mean = 0.0;
  double median = 0.0;
  std::size_t max = 0;
  double terminated_rate = 0.0;  // token_length < max_length
};

// Throws std::invalid_argument on an empty batch or max_length == 0.
LengthStats length_stats(const ResponseBatch& batch, std::size_t max_length);

}  // namespace cotforge
