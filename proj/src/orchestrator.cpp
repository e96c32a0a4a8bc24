#include "cotforge/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

namespace cotforge::templates::data {
extern const std::string_view model_verifier;
extern const std::string_view answer_extraction;
extern const std::string_view action_clarify;
extern const std::string_view action_decompose;
extern const std::string_view action_solution_step;
extern const std::string_view action_reflection;
extern const std::string_view action_answer;
}  // namespace cotforge::templates::data

namespace cotforge::llm {

using json = nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (true) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

// All <tag>...</tag> bodies in order, trimmed.
std::vector<std::string> tag_contents(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find(open, pos)) != std::string_view::npos) {
    const auto body = pos + open.size();
    const auto end = text.find(close, body);
    if (end == std::string_view::npos) break;
    out.push_back(trim(text.substr(body, end - body)));
    pos = end + close.size();
  }
  return out;
}

std::optional<std::string> first_tag(std::string_view text, std::string_view tag) {
  auto all = tag_contents(text, tag);
  if (all.empty()) return std::nullopt;
  return all.front();
}

std::optional<bool> parse_bool(const std::optional<std::string>& s) {
  if (!s) return std::nullopt;
  const auto v = lower(*s);
  if (v.rfind("true", 0) == 0) return true;
  if (v.rfind("false", 0) == 0) return false;
  return std::nullopt;
}

// Contents of the last balanced \boxed{...}.
std::optional<std::string> last_box(std::string_view text) {
  constexpr std::string_view marker = "\\boxed{";
  const auto pos = text.rfind(marker);
  if (pos == std::string_view::npos) return std::nullopt;
  int depth = 1;
  const auto start = pos + marker.size();
  for (std::size_t i = start; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return std::string(text.substr(start, i - start));
  }
  return std::nullopt;
}

std::string action_token(std::string_view raw) {
  std::string t = lower(trim(raw));
  while (!t.empty() && std::ispunct(static_cast<unsigned char>(t.back())) && t.back() != '_') t.pop_back();
  while (!t.empty() && (t.front() == '`' || t.front() == '*' || t.front() == '"')) t.erase(t.begin());
  std::replace(t.begin(), t.end(), ' ', '_');
  return t;
}

struct Directive {
  bool present = false;
  std::optional<ActionKind> action;
  std::string stripped;  // reply without the directive
};

Directive find_directive(std::string_view reply) {
  Directive d;
  if (auto tag = first_tag(reply, "next_action")) {
    d.present = true;
    d.action = parse_action(action_token(*tag));
    const auto b = reply.find("<next_action>");
    const auto e = reply.find("</next_action>", b) + std::string_view("</next_action>").size();
    d.stripped = trim(std::string(reply.substr(0, b)) + std::string(reply.substr(e)));
    return d;
  }
  std::string kept;
  for (auto line : split_lines(reply)) {
    const auto t = trim(line);
    if (lower(t).rfind("next action:", 0) == 0) {
      d.present = true;
      d.action = parse_action(action_token(std::string_view(t).substr(12)));
      continue;
    }
    kept.append(line);
    kept.push_back('\n');
  }
  d.stripped = trim(kept);
  return d;
}

}  // namespace

MockClient::MockClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}

MockClient MockClient::from_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mock script " + path);
  std::vector<std::string> replies;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      if (j.is_string()) {
        replies.push_back(j.get<std::string>());
      } else if (j.is_object() && j.contains("text") && j["text"].is_string()) {
        replies.push_back(j["text"].get<std::string>());
      } else {
        throw std::runtime_error("expected a string or an object with \"text\"");
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return MockClient(std::move(replies));
}

std::string MockClient::complete(const CompletionRequest& request) {
  requests_.push_back(request);
  if (next_ >= replies_.size()) throw CompletionError("mock script exhausted");
  return replies_[next_++];
}

EndpointSettings EndpointSettings::from_env() {
  EndpointSettings s;
  const char* url = std::getenv("COTFORGE_LLM_ENDPOINT");
  if (!url || !*url) throw std::runtime_error("COTFORGE_LLM_ENDPOINT is not set");
  s.url = url;
  if (const char* token = std::getenv("COTFORGE_LLM_TOKEN")) s.token = token;
  return s;
}

HttpClient::HttpClient(EndpointSettings settings) : settings_(std::move(settings)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(settings_.url, m, url_re)) throw std::invalid_argument("bad endpoint url: " + settings_.url);
  base_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
}

std::string HttpClient::complete(const CompletionRequest& request) {
  httplib::Client cli(base_);
  const auto timeout = std::chrono::duration<double>(settings_.timeout_seconds);
  cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!settings_.token.empty()) headers.emplace("Authorization", "Bearer " + settings_.token);
  const json body = {{"prompt", request.prompt}, {"temperature", request.temperature},
                     {"max_tokens", request.max_tokens}};
  const auto payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= settings_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(250 << std::min(attempt, 4)));
    auto res = cli.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server returned " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw CompletionError("server returned " + std::to_string(res->status));
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      throw CompletionError(std::string("reply is not JSON: ") + e.what());
    }
    if (reply.contains("text") && reply["text"].is_string()) return reply["text"].get<std::string>();
    if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
      const auto& c = reply["choices"][0];
      if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
      if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string()) {
        return c["message"]["content"].get<std::string>();
      }
    }
    throw CompletionError("reply has no text field");
  }
  throw CompletionError(last_error);
}

namespace templates {

std::string_view model_verifier() { return ::cotforge::templates::data::model_verifier; }
std::string_view answer_extraction() { return ::cotforge::templates::data::answer_extraction; }
std::string_view action_clarify() { return ::cotforge::templates::data::action_clarify; }
std::string_view action_decompose() { return ::cotforge::templates::data::action_decompose; }
std::string_view action_solution_step() { return ::cotforge::templates::data::action_solution_step; }
std::string_view action_reflection() { return ::cotforge::templates::data::action_reflection; }
std::string_view action_answer() { return ::cotforge::templates::data::action_answer; }

const std::vector<std::string>& names() {
  static const std::vector<std::string> n = {"model_verifier",       "answer_extraction", "action_clarify",
                                             "action_decompose",     "action_solution_step",
                                             "action_reflection",    "action_answer"};
  return n;
}

std::string_view by_name(std::string_view name) {
  if (name == "model_verifier") return model_verifier();
  if (name == "answer_extraction") return answer_extraction();
  if (name == "action_clarify") return action_clarify();
  if (name == "action_decompose") return action_decompose();
  if (name == "action_solution_step") return action_solution_step();
  if (name == "action_reflection") return action_reflection();
  if (name == "action_answer") return action_answer();
  throw std::out_of_range("unknown template: " + std::string(name));
}

}  // namespace templates

std::string fill_template(std::string_view tpl, const Bindings& bindings) {
  std::vector<bool> used(bindings.size(), false);
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    bool replaced = false;
    if (tpl[i] == '{') {
      for (std::size_t b = 0; b < bindings.size(); ++b) {
        const auto& name = bindings[b].first;
        if (tpl.compare(i + 1, name.size(), name) == 0 && i + 1 + name.size() < tpl.size() &&
            tpl[i + 1 + name.size()] == '}') {
          out += bindings[b].second;
          used[b] = true;
          i += name.size() + 2;
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(tpl[i++]);
  }
  for (std::size_t b = 0; b < bindings.size(); ++b) {
    if (!used[b]) throw std::invalid_argument("placeholder {" + bindings[b].first + "} not in template");
  }
  return out;
}

std::string last_lines(std::string_view text, std::size_t n) {
  if (n == 0) return {};
  // A trailing newline does not start another line.
  std::size_t pos = text.size();
  if (pos > 0 && text[pos - 1] == '\n') --pos;
  std::size_t count = 0;
  while (pos > 0) {
    if (text[pos - 1] == '\n' && ++count == n) break;
    --pos;
  }
  return std::string(text.substr(pos));
}

std::optional<CorrectnessLabel> parse_judgement(std::string_view reply) {
  const auto lines = split_lines(reply);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const auto l = lower(*it);
    const auto pos = l.rfind("judgement:");
    if (pos == std::string::npos) continue;
    std::string v;
    for (char c : l.substr(pos + 10)) {
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ' ') v.push_back(c);
    }
    v = trim(v);
    std::replace(v.begin(), v.end(), ' ', '_');
    if (v == "correct") return CorrectnessLabel::Correct;
    if (v == "wrong") return CorrectnessLabel::Wrong;
    if (v == "not_found") return CorrectnessLabel::NoAnswer;
    return std::nullopt;
  }
  return std::nullopt;
}

VerifyOutcome model_verify(std::string_view response, std::string_view reference, CompletionClient& client,
                           int parse_retries) {
  VerifyOutcome outcome;
  const auto prompt = fill_template(templates::model_verifier(),
                                    {{"out", last_lines(response, kVerifierTailLines)}, {"ref", std::string(reference)}});
  for (int attempt = 0; attempt <= parse_retries; ++attempt) {
    ++outcome.attempts;
    std::string reply;
    try {
      reply = client.complete({prompt, 0.0, 1024});
    } catch (const CompletionError& e) {
      outcome.diagnostics.push_back(std::string("request failed: ") + e.what());
      break;
    }
    if (auto label = parse_judgement(reply)) {
      outcome.label = *label;
      return outcome;
    }
    outcome.diagnostics.push_back("no judgement in reply (attempt " + std::to_string(attempt + 1) + ")");
  }
  outcome.label = CorrectnessLabel::NoAnswer;
  return outcome;
}

std::optional<std::string> llm_extract_answer(std::string_view problem, std::string_view solution,
                                              CompletionClient& client) {
  const auto prompt = fill_template(templates::answer_extraction(),
                                    {{"Problem", std::string(problem)}, {"Solution", std::string(solution)}});
  std::string reply;
  try {
    reply = client.complete({prompt, 0.0, 512});
  } catch (const CompletionError&) {
    return std::nullopt;
  }
  auto box = last_box(reply);
  if (!box) return std::nullopt;
  auto value = trim(*box);
  if (value.empty()) return std::nullopt;
  return value;
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Clarify:
      return "clarify";
    case ActionKind::Decompose:
      return "decompose";
    case ActionKind::SolutionStep:
      return "solution_step";
    case ActionKind::Reflection:
      return "reflection";
    case ActionKind::Answer:
      return "answer";
  }
  return "?";
}

std::optional<ActionKind> parse_action(std::string_view name) {
  for (auto k : {ActionKind::Clarify, ActionKind::Decompose, ActionKind::SolutionStep, ActionKind::Reflection,
                 ActionKind::Answer}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

namespace {

class Machine {
 public:
  Machine(std::string_view problem, CompletionClient& client, const ActionOptions& options)
      : client_(client), options_(options) {
    log_.prompt = std::string(problem);
    log_.goals.push_back(GoalNode{trim(problem), 0, "open"});
    stack_.push_back(0);
  }

  ActionLog run() {
    ActionKind state = ActionKind::Clarify;
    bool retried = false;
    bool forced = false;
    while (!log_.terminal) {
      if (log_.thoughts.size() + 1 >= options_.max_steps && state != ActionKind::Answer) {
        log_.diagnostics.push_back("step cap reached; forcing answer");
        state = ActionKind::Answer;
        forced = true;
      }
      auto& client = state == ActionKind::Reflection && options_.reflection_client ? *options_.reflection_client
                                                                                    : client_;
      std::string reply;
      try {
        reply = client.complete({prompt_for(state), options_.temperature, options_.max_tokens});
      } catch (const CompletionError& e) {
        log_.diagnostics.push_back(std::string(to_string(state)) + ": request failed: " + e.what());
        if (state == ActionKind::Answer) break;
      }

      if (state == ActionKind::Answer) {
        log_.thoughts.push_back(Thought{ActionKind::Answer, find_directive(reply).stripped, forced});
        log_.terminal = true;
        break;
      }
      if (auto next = apply(state, reply)) {
        state = *next;
        retried = false;
        forced = false;
        continue;
      }
      if (!retried) {
        log_.diagnostics.push_back(std::string(to_string(state)) + ": unparsable reply; retrying");
        retried = true;
        continue;
      }
      log_.diagnostics.push_back(std::string(to_string(state)) + ": unparsable reply again; forcing answer");
      state = ActionKind::Answer;
      forced = true;
    }
    return std::move(log_);
  }

 private:
  const GoalNode& current() const { return log_.goals[stack_.back()]; }
  const GoalNode& parent() const { return log_.goals[stack_.size() > 1 ? stack_[stack_.size() - 2] : stack_.back()]; }

  std::string solution() const {
    std::string out;
    for (const auto& t : log_.thoughts) {
      if (!out.empty()) out += "\n\n";
      out += t.text;
    }
    return out;
  }

  std::string goal_tree() const {
    std::string out;
    for (const auto& g : log_.goals) {
      if (!out.empty()) out.push_back('\n');
      out += std::string(static_cast<std::size_t>(g.depth) * 2, ' ') + "- " + g.text + " [" + g.status + "]";
    }
    return out;
  }

  std::string prompt_for(ActionKind state) const {
    switch (state) {
      case ActionKind::Clarify:
        return fill_template(templates::action_clarify(), {{"goal", log_.prompt}});
      case ActionKind::Decompose:
        return fill_template(templates::action_decompose(), {{"current_goal", current().text},
                                                             {"parent_goal", parent().text},
                                                             {"solution", solution()}});
      case ActionKind::SolutionStep:
        return fill_template(templates::action_solution_step(),
                             {{"current_goal", current().text}, {"solution", solution()}, {"prior_step", prior_step_}});
      case ActionKind::Reflection:
        return fill_template(templates::action_reflection(),
                             {{"current_goal", current().text},
                              {"parent_goal", "<parent goal>\n" + parent().text + "\n</parent goal>"},
                              {"solution", solution()},
                              {"parent_goal.target", parent().text},
                              {"parent_goal_tree", goal_tree()}});
      case ActionKind::Answer:
        return fill_template(templates::action_answer(),
                             {{"solution", solution()}, {"format", options_.answer_format}});
    }
    return {};
  }

  // Appends the thought and returns the next state, or nullopt when the reply
  // names no usable transition.
  std::optional<ActionKind> apply(ActionKind state, const std::string& reply) {
    const auto d = find_directive(reply);
    if (d.present && !d.action) return std::nullopt;
    if (trim(reply).empty()) return std::nullopt;

    switch (state) {
      case ActionKind::Clarify: {
        if (auto goal = first_tag(reply, "goal"); goal && !goal->empty()) log_.goals[0].text = *goal;
        auto text = first_tag(reply, "clarification").value_or(d.stripped);
        log_.thoughts.push_back(Thought{state, text});
        return d.action.value_or(ActionKind::Decompose);
      }
      case ActionKind::Decompose: {
        const auto sentences = tag_contents(reply, "sentence");
        if (sentences.empty()) {
          if (!d.action) return std::nullopt;
          log_.thoughts.push_back(Thought{state, d.stripped});
          return d.action;
        }
        log_.goals.push_back(GoalNode{sentences.front(), current().depth + 1, "open"});
        stack_.push_back(log_.goals.size() - 1);
        for (std::size_t i = 1; i < sentences.size(); ++i) log_.alternatives.push_back(sentences[i]);
        log_.thoughts.push_back(Thought{state, sentences.front()});
        return d.action.value_or(ActionKind::SolutionStep);
      }
      case ActionKind::SolutionStep: {
        prior_step_ = d.stripped;
        log_.thoughts.push_back(Thought{state, d.stripped});
        return d.action.value_or(ActionKind::Reflection);
      }
      case ActionKind::Reflection: {
        const auto current_done = parse_bool(first_tag(reply, "current_goal_achieved"));
        const auto parent_done = parse_bool(first_tag(reply, "parent_goal_achieved"));
        if (!d.action && !current_done && !parent_done) return std::nullopt;
        const auto new_goal = first_tag(reply, "new_goal").value_or("");
        log_.thoughts.push_back(Thought{state, first_tag(reply, "verification").value_or(d.stripped)});

        ActionKind next = ActionKind::SolutionStep;
        if (parent_done.value_or(false)) {
          next = ActionKind::Answer;
        } else if (current_done.value_or(false)) {
          log_.goals[stack_.back()].status = "done";
          if (stack_.size() > 1) stack_.pop_back();
          next = ActionKind::Decompose;
        } else if (!new_goal.empty()) {
          log_.goals[stack_.back()].status = "replaced";
          const int depth = current().depth;
          stack_.pop_back();
          log_.goals.push_back(GoalNode{new_goal, depth, "open"});
          stack_.push_back(log_.goals.size() - 1);
        }
        return d.action.value_or(next);
      }
      case ActionKind::Answer:
        break;
    }
    return std::nullopt;
  }

  CompletionClient& client_;
  const ActionOptions& options_;
  ActionLog log_;
  std::vector<std::size_t> stack_;
  std::string prior_step_;
};

}  // namespace

ActionLog run_action_machine(std::string_view problem, CompletionClient& client, const ActionOptions& options) {
  if (options.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  return Machine(problem, client, options).run();
}

}  // namespace cotforge::llm
