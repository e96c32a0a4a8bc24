#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "cotforge/reward.hpp"

namespace cotforge {

using BigInt = boost::multiprecision::cpp_int;

// Exact rational in lowest terms with a positive denominator.
class Rational {
 public:
  Rational() = default;
  // Throws std::domain_error on a zero denominator.
  Rational(BigInt numerator, BigInt denominator);

  const BigInt& numerator() const { return num_; }
  const BigInt& denominator() const { return den_; }
  std::string str() const;  // "a/b", or "a" when b == 1

  friend bool operator==(const Rational&, const Rational&) = default;

 private:
  BigInt num_ = 0;
  BigInt den_ = 1;
};

struct BooleanAnswer {
  bool value = false;
  friend bool operator==(const BooleanAnswer&, const BooleanAnswer&) = default;
};

struct TextAnswer {
  std::string normalized;
  friend bool operator==(const TextAnswer&, const TextAnswer&) = default;
};

// Comparable form of a short answer. Equality is structural: values of
// different kinds never compare equal.
using CanonicalAnswer = std::variant<Rational, BooleanAnswer, TextAnswer>;

// Contents of the last balanced \boxed{...}; otherwise the rest of the line
// after the last "final answer is" (case-insensitive); otherwise nullopt.
std::optional<std::string> extract_boxed(std::string_view text);

// Trims, strips surrounding $...$ and \(...\), removes LaTeX spacing commands
// and \left/\right, unwraps \text{...}, drops whitespace and lowercases.
std::string normalize_answer_text(std::string_view answer);

// Integers, finite decimals, a/b and \frac{a}{b} become exact rationals;
// true/false become booleans; anything else is normalized text.
CanonicalAnswer canonicalize(std::string_view answer);

bool answers_equal(std::string_view a, std::string_view b);

struct GradedRecord {
  std::string problem_id;
  std::string response_text;
  std::optional<std::string> extracted;
  CorrectnessLabel label = CorrectnessLabel::NoAnswer;
};

CorrectnessLabel grade(std::string_view response, std::string_view gold);
GradedRecord grade_record(std::string problem_id, std::string response, std::string_view gold);

struct CandidateRecord {
  std::string problem_id;
  std::string gold;
  std::string response;
};

struct RejectionResult {
  std::vector<GradedRecord> kept;
  std::size_t seen = 0;
  std::size_t malformed = 0;
};

// Keeps records that grade Correct, at most keep_per_prompt per problem id, in
// input order. Records with an empty problem id or gold are malformed.
RejectionResult rejection_filter(const std::vector<CandidateRecord>& records,
                                 std::optional<std::size_t> keep_per_prompt = std::nullopt);

inline constexpr std::size_t kShortFormMaxChars = 30;

// True for rational and boolean golds, or normalized text of 1..30 characters.
bool short_form_filterable(std::string_view gold);

}  // namespace cotforge
