#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotforge/jsonl.hpp"

namespace cotforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitConfig = 2;

// Bad record contents or unreadable input data.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses argv, runs one subcommand and returns the exit status. Normal output
// goes to out (or --out), diagnostics and summaries to err.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Shipped data files: $COTFORGE_DATA_DIR, else the source tree's data/.
std::string data_dir();

enum class PromptsetMode { Unfiltered, Filtered };

struct PromptsetResult {
  std::vector<io::Json> kept;
  std::size_t seen = 0;
  std::size_t skipped = 0;  // missing gold or repeated problem_id
  std::vector<std::string> warnings;

  double ratio() const { return seen == 0 ? 0.0 : static_cast<double>(kept.size()) / static_cast<double>(seen); }
};

// Filtered mode keeps records whose gold is a checkable short form.
PromptsetResult build_rl_promptset(const std::vector<io::Json>& records, PromptsetMode mode);

}  // namespace cotforge::cli
