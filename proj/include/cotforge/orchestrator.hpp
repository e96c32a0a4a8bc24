#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cotforge/reward.hpp"

namespace cotforge::llm {

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 512;
};

// Transport failure, exhausted mock script, or an unusable reply body.
class CompletionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

// Replays canned replies in order and records every request. Never touches
// the network.
class MockClient : public CompletionClient {
 public:
  explicit MockClient(std::vector<std::string> replies);

  // One reply per line: a JSON object with a "text" field, or a bare JSON
  // string. Throws std::runtime_error on an unreadable file or a bad line.
  static MockClient from_jsonl(const std::string& path);

  std::string complete(const CompletionRequest& request) override;

  const std::vector<CompletionRequest>& requests() const { return requests_; }
  std::size_t remaining() const { return replies_.size() - next_; }

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
  std::vector<CompletionRequest> requests_;
};

struct EndpointSettings {
  std::string url;    // http(s)://host[:port]/path
  std::string token;  // sent as a bearer token when non-empty
  double timeout_seconds = 60.0;
  int retries = 2;  // extra attempts after a transport error or 5xx

  // COTFORGE_LLM_ENDPOINT and COTFORGE_LLM_TOKEN. Throws std::runtime_error
  // when the endpoint variable is unset.
  static EndpointSettings from_env();
};

// POSTs {"prompt", "temperature", "max_tokens"} and reads either {"text": ...}
// or a completions-style {"choices": [{"text"|"message": ...}]} body.
class HttpClient : public CompletionClient {
 public:
  explicit HttpClient(EndpointSettings settings);
  std::string complete(const CompletionRequest& request) override;

 private:
  EndpointSettings settings_;
  std::string base_;
  std::string path_;
};

namespace templates {

std::string_view model_verifier();
std::string_view answer_extraction();
std::string_view action_clarify();
std::string_view action_decompose();
std::string_view action_solution_step();
std::string_view action_reflection();
std::string_view action_answer();

// By file stem, e.g. "action_clarify". Throws std::out_of_range.
std::string_view by_name(std::string_view name);
const std::vector<std::string>& names();

}  // namespace templates

using Bindings = std::vector<std::pair<std::string, std::string>>;

// Replaces each "{name}" for the bound names only; other braces (LaTeX) are
// left alone. Throws std::invalid_argument when a bound name does not occur.
std::string fill_template(std::string_view tpl, const Bindings& bindings);

// Last n newline-separated lines of text.
std::string last_lines(std::string_view text, std::size_t n);

inline constexpr std::size_t kVerifierTailLines = 20;

// Label from the last "Judgement:" line of a verifier reply.
std::optional<CorrectnessLabel> parse_judgement(std::string_view reply);

struct VerifyOutcome {
  CorrectnessLabel label = CorrectnessLabel::NoAnswer;
  int attempts = 0;
  std::vector<std::string> diagnostics;
};

// Sends the verifier prompt with the last 20 lines of the response. A reply
// without a judgement is retried up to parse_retries times, then NoAnswer.
VerifyOutcome model_verify(std::string_view response, std::string_view reference, CompletionClient& client,
                           int parse_retries = 1);

// Contents of the reply's box, or nullopt for an empty box, a missing box or a
// failed request.
std::optional<std::string> llm_extract_answer(std::string_view problem, std::string_view solution,
                                              CompletionClient& client);

enum class ActionKind { Clarify, Decompose, SolutionStep, Reflection, Answer };

std::string_view to_string(ActionKind kind);
std::optional<ActionKind> parse_action(std::string_view name);

struct Thought {
  ActionKind action = ActionKind::Clarify;
  std::string text;
  bool forced = false;  // answer prompt issued by the step cap or a parse failure
};

struct GoalNode {
  std::string text;
  int depth = 0;
  std::string status;  // "open", "done", "replaced"
};

struct ActionLog {
  std::string prompt;
  std::vector<Thought> thoughts;  // one per accepted transition
  std::vector<GoalNode> goals;
  std::vector<std::string> alternatives;  // decompose candidates not taken
  std::vector<std::string> diagnostics;
  bool terminal = false;
};

struct ActionOptions {
  std::size_t max_steps = 32;
  std::string answer_format = "Put the final answer in \\boxed{}.";
  double temperature = 0.0;
  int max_tokens = 1024;
  CompletionClient* reflection_client = nullptr;  // defaults to the main client
};

// Starts in clarify. The next action is taken from an explicit
// "Next action: <name>" line or <next_action> tag when present, otherwise
// from the action's own tags. An unparsable reply is retried once, then the
// answer prompt is forced; step max_steps always uses the answer prompt.
ActionLog run_action_machine(std::string_view problem, CompletionClient& client, const ActionOptions& options = {});

}  // namespace cotforge::llm
