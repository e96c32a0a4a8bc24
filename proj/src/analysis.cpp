#include "cotforge/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace cotforge {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

const std::vector<std::string>& default_keywords() {
  static const std::vector<std::string> kKeywords = {"wait", "recheck", "alternatively", "retry", "however"};
  return kKeywords;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  if (needle.empty()) return 0;
  const std::string hay = lowercase(text);
  const std::string pat = lowercase(needle);
  std::size_t count = 0;
  for (std::size_t pos = hay.find(pat); pos != std::string::npos; pos = hay.find(pat, pos + pat.size())) ++count;
  return count;
}

KeywordReport keyword_rates(const ResponseBatch& batch, const std::vector<std::string>& keywords) {
  if (keywords.empty()) throw std::invalid_argument("keyword list must not be empty");
  KeywordReport report;
  for (const auto& kw : keywords) {
    KeywordRate rate{kw, 0.0, 0.0};
    if (!batch.empty()) {
      std::size_t containing = 0;
      std::size_t total = 0;
      for (const auto& r : batch) {
        const std::size_t c = count_occurrences(r.text, kw);
        total += c;
        containing += c > 0 ? 1 : 0;
      }
      const auto n = static_cast<double>(batch.size());
      rate.contain_fraction = static_cast<double>(containing) / n;
      rate.mean_count = static_cast<double>(total) / n;
    }
    report.rates.push_back(std::move(rate));
  }
  return report;
}

std::size_t branching_frequency(std::string_view text) { return count_occurrences(text, "alternatively,"); }

double coding_rate(const ResponseBatch& batch) {
  if (batch.empty()) throw std::invalid_argument("coding rate of an empty batch is undefined");
  const auto coded = std::count_if(batch.begin(), batch.end(),
                                   [](const Response& r) { return r.text.find(kCodeMarker) != std::string::npos; });
  return static_cast<double>(coded) / static_cast<double>(batch.size());
}

LengthStats length_stats(const ResponseBatch& batch, std::size_t max_length) {
  if (batch.empty()) throw std::invalid_argument("length statistics of an empty batch are undefined");
  if (max_length == 0) throw std::invalid_argument("max_length must be positive");
  std::vector<std::size_t> lengths;
  lengths.reserve(batch.size());
  for (const auto& r : batch) lengths.push_back(r.token_length);
  std::sort(lengths.begin(), lengths.end());

  LengthStats stats;
  double sum = 0.0;
  std::size_t terminated = 0;
  for (std::size_t len : lengths) {
    sum += static_cast<double>(len);
    if (len < max_length) ++terminated;
  }
  const std::size_t n = lengths.size();
  stats.mean = sum / static_cast<double>(n);
  stats.median = n % 2 == 1 ? static_cast<double>(lengths[n / 2])
                            : 0.5 * static_cast<double>(lengths[n / 2 - 1] + lengths[n / 2]);
  stats.max = lengths.back();
  stats.terminated_rate = static_cast<double>(terminated) / static_cast<double>(n);
  return stats;
}

}  // namespace cotforge
