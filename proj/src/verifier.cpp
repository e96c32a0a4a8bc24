#include "cotforge/verifier.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_map>

namespace cotforge {

Rational::Rational(BigInt numerator, BigInt denominator) : num_(std::move(numerator)), den_(std::move(denominator)) {
  if (den_ == 0) throw std::domain_error("rational with zero denominator");
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
  BigInt g = boost::multiprecision::gcd(num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
}

std::string Rational::str() const {
  if (den_ == 1) return num_.str();
  return num_.str() + "/" + den_.str();
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Index of the brace matching the '{' at `open`, or npos.
std::size_t matching_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && (s[i + 1] == '{' || s[i + 1] == '}')) {
      ++i;  // escaped brace
      continue;
    }
    if (s[i] == '{') {
      ++depth;
    } else if (s[i] == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

bool strip_wrapper(std::string_view& s, std::string_view open, std::string_view close) {
  if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
    s = trim(s.substr(open.size(), s.size() - open.size() - close.size()));
    return true;
  }
  return false;
}

// Replaces the control word `word` (e.g. "\quad") when it is not the prefix of a longer command.
void erase_command(std::string& s, std::string_view word) {
  std::size_t pos = 0;
  while ((pos = s.find(word, pos)) != std::string::npos) {
    const std::size_t end = pos + word.size();
    if (end < s.size() && is_alpha(s[end]) && is_alpha(word.back())) {
      pos = end;
      continue;
    }
    s.erase(pos, word.size());
  }
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// \text{abc} -> abc for the given wrapper command.
void unwrap_command(std::string& s, std::string_view command) {
  std::size_t pos = 0;
  while ((pos = s.find(command, pos)) != std::string::npos) {
    std::size_t open = pos + command.size();
    while (open < s.size() && is_space(s[open])) ++open;
    if (open >= s.size() || s[open] != '{') {
      pos += command.size();
      continue;
    }
    const std::size_t close = matching_brace(s, open);
    if (close == std::string::npos) {
      pos += command.size();
      continue;
    }
    std::string inner = s.substr(open + 1, close - open - 1);
    s.replace(pos, close - pos + 1, inner);
  }
}

// Base-10 value of a digit string. cpp_int would read a leading 0 as octal.
BigInt from_digits(std::string_view digits) {
  while (digits.size() > 1 && digits.front() == '0') digits.remove_prefix(1);
  return digits.empty() ? BigInt(0) : BigInt(std::string(digits));
}

std::optional<BigInt> parse_integer(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty() || !std::all_of(s.begin(), s.end(), is_digit)) return std::nullopt;
  BigInt v = from_digits(s);
  return negative ? BigInt(-v) : v;
}

// "1,234,567" -> "1234567"; anything else unchanged.
std::string drop_thousands_separators(std::string_view s) {
  std::string_view body = s;
  std::string sign;
  if (!body.empty() && (body.front() == '+' || body.front() == '-')) {
    sign = std::string(1, body.front());
    body.remove_prefix(1);
  }
  const std::size_t first_comma = body.find(',');
  if (first_comma == std::string_view::npos || first_comma == 0 || first_comma > 3) return std::string(s);
  std::string_view int_part = body.substr(0, body.find('.'));
  std::string_view rest = body.substr(int_part.size());
  std::string digits;
  std::size_t group_start = first_comma + 1;
  if (!std::all_of(int_part.begin(), int_part.begin() + static_cast<std::ptrdiff_t>(first_comma), is_digit)) {
    return std::string(s);
  }
  digits.append(int_part.substr(0, first_comma));
  while (group_start <= int_part.size()) {
    std::string_view group = int_part.substr(group_start, 3);
    if (group.size() != 3 || !std::all_of(group.begin(), group.end(), is_digit)) return std::string(s);
    digits.append(group);
    const std::size_t next = group_start + 3;
    if (next == int_part.size()) break;
    if (int_part[next] != ',') return std::string(s);
    group_start = next + 1;
  }
  return sign + digits + std::string(rest);
}

std::optional<Rational> parse_decimal(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  const std::size_t dot = s.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  std::string_view int_part = s.substr(0, dot);
  std::string_view frac_part = s.substr(dot + 1);
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  if (!std::all_of(int_part.begin(), int_part.end(), is_digit) ||
      !std::all_of(frac_part.begin(), frac_part.end(), is_digit)) {
    return std::nullopt;
  }
  std::string digits = std::string(int_part) + std::string(frac_part);
  BigInt num = from_digits(digits);
  BigInt den = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(frac_part.size()));
  if (negative) num = -num;
  return Rational(num, den);
}

// Returns nullopt when the text is not a fraction; throws nothing on a zero
// denominator but reports it through `zero_denominator`.
std::optional<Rational> parse_fraction(std::string_view s, bool& zero_denominator) {
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  std::optional<BigInt> num;
  std::optional<BigInt> den;
  if (s.starts_with("\\frac")) {
    std::string_view rest = s.substr(5);
    if (rest.size() == 2 && is_digit(rest[0]) && is_digit(rest[1])) {  // \frac12
      num = BigInt(rest[0] - '0');
      den = BigInt(rest[1] - '0');
    } else if (!rest.empty() && rest.front() == '{') {
      const std::size_t c1 = matching_brace(rest, 0);
      if (c1 == std::string_view::npos || c1 + 1 >= rest.size() || rest[c1 + 1] != '{') return std::nullopt;
      const std::size_t c2 = matching_brace(rest, c1 + 1);
      if (c2 != rest.size() - 1) return std::nullopt;
      num = parse_integer(rest.substr(1, c1 - 1));
      den = parse_integer(rest.substr(c1 + 2, c2 - c1 - 2));
    }
  } else {
    const std::size_t slash = s.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    num = parse_integer(s.substr(0, slash));
    den = parse_integer(s.substr(slash + 1));
  }
  if (!num || !den) return std::nullopt;
  if (*den == 0) {
    zero_denominator = true;
    return std::nullopt;
  }
  return Rational(negative ? BigInt(-*num) : *num, *den);
}

}  // namespace

std::optional<std::string> extract_boxed(std::string_view text) {
  static constexpr std::string_view kBox = "\\boxed";
  std::optional<std::string> last;
  bool saw_box = false;
  std::size_t pos = 0;
  while ((pos = text.find(kBox, pos)) != std::string_view::npos) {
    std::size_t open = pos + kBox.size();
    while (open < text.size() && is_space(text[open])) ++open;
    pos += kBox.size();
    if (open >= text.size() || text[open] != '{') continue;
    saw_box = true;
    const std::size_t close = matching_brace(text, open);
    if (close == std::string_view::npos) continue;
    last = std::string(text.substr(open + 1, close - open - 1));
  }
  if (last) {
    if (trim(*last).empty()) return std::nullopt;
    return last;
  }
  if (saw_box) return std::nullopt;

  static constexpr std::string_view kMarker = "final answer is";
  const std::string lowered = to_lower(text);
  const std::size_t marker = lowered.rfind(kMarker);
  if (marker == std::string::npos) return std::nullopt;
  std::string_view tail = text.substr(marker + kMarker.size());
  tail = tail.substr(0, tail.find('\n'));
  tail = trim(tail);
  if (tail.starts_with(':')) tail = trim(tail.substr(1));
  while (!tail.empty() && tail.back() == '.') tail = trim(tail.substr(0, tail.size() - 1));
  while (strip_wrapper(tail, "$", "$")) {
  }
  if (tail.empty()) return std::nullopt;
  return std::string(tail);
}

std::string normalize_answer_text(std::string_view answer) {
  std::string_view view = trim(answer);
  for (bool stripped = true; stripped;) {
    stripped = strip_wrapper(view, "$$", "$$") || strip_wrapper(view, "$", "$") ||
               strip_wrapper(view, "\\(", "\\)") || strip_wrapper(view, "\\[", "\\]");
  }
  std::string s(view);
  for (std::string_view cmd : {"\\text", "\\textbf", "\\mathrm", "\\mathbf", "\\mbox"}) unwrap_command(s, cmd);
  for (std::string_view cmd : {"\\qquad", "\\quad", "\\left", "\\right", "\\displaystyle"}) erase_command(s, cmd);
  for (std::string_view spacing : {"\\,", "\\;", "\\:", "\\!", "\\ "}) replace_all(s, spacing, "");
  replace_all(s, "{,}", ",");
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  s.erase(std::remove_if(s.begin(), s.end(), is_space), s.end());
  return to_lower(s);
}

CanonicalAnswer canonicalize(std::string_view answer) {
  const std::string text = normalize_answer_text(answer);
  if (text == "true") return BooleanAnswer{true};
  if (text == "false") return BooleanAnswer{false};

  const std::string numeric = drop_thousands_separators(text);
  if (auto v = parse_integer(numeric)) return Rational(*v, 1);
  if (auto v = parse_decimal(numeric)) return *v;
  bool zero_denominator = false;
  if (auto v = parse_fraction(text, zero_denominator)) return *v;
  return TextAnswer{text};
}

bool answers_equal(std::string_view a, std::string_view b) { return canonicalize(a) == canonicalize(b); }

CorrectnessLabel grade(std::string_view response, std::string_view gold) {
  const auto extracted = extract_boxed(response);
  if (!extracted) return CorrectnessLabel::NoAnswer;
  return answers_equal(*extracted, gold) ? CorrectnessLabel::Correct : CorrectnessLabel::Wrong;
}

GradedRecord grade_record(std::string problem_id, std::string response, std::string_view gold) {
  GradedRecord rec;
  rec.problem_id = std::move(problem_id);
  rec.extracted = extract_boxed(response);
  rec.label = !rec.extracted                         ? CorrectnessLabel::NoAnswer
              : answers_equal(*rec.extracted, gold) ? CorrectnessLabel::Correct
                                                     : CorrectnessLabel::Wrong;
  rec.response_text = std::move(response);
  return rec;
}

RejectionResult rejection_filter(const std::vector<CandidateRecord>& records,
                                 std::optional<std::size_t> keep_per_prompt) {
  RejectionResult result;
  std::unordered_map<std::string, std::size_t> kept_per_id;
  for (const auto& rec : records) {
    ++result.seen;
    if (rec.problem_id.empty() || trim(rec.gold).empty()) {
      ++result.malformed;
      continue;
    }
    auto graded = grade_record(rec.problem_id, rec.response, rec.gold);
    if (graded.label != CorrectnessLabel::Correct) continue;
    auto& count = kept_per_id[rec.problem_id];
    if (keep_per_prompt && count >= *keep_per_prompt) continue;
    ++count;
    result.kept.push_back(std::move(graded));
  }
  return result;
}

bool short_form_filterable(std::string_view gold) {
  const auto canonical = canonicalize(gold);
  if (const auto* text = std::get_if<TextAnswer>(&canonical)) {
    return !text->normalized.empty() && text->normalized.size() <= kShortFormMaxChars;
  }
  return true;
}

}  // namespace cotforge
