#include "cotforge/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <unordered_set>

#include <CLI11.hpp>

#include "cotforge/advantage.hpp"
#include "cotforge/analysis.hpp"
#include "cotforge/config.hpp"
#include "cotforge/corpus.hpp"
#include "cotforge/orchestrator.hpp"
#include "cotforge/parallel.hpp"
#include "cotforge/repetition.hpp"
#include "cotforge/reward.hpp"
#include "cotforge/simulator.hpp"
#include "cotforge/verifier.hpp"

#ifndef COTFORGE_DATA_DIR
#define COTFORGE_DATA_DIR "data"
#endif

namespace cotforge::cli {

using io::Json;

std::string data_dir() {
  if (const char* env = std::getenv("COTFORGE_DATA_DIR"); env && *env) return env;
  return COTFORGE_DATA_DIR;
}

PromptsetResult build_rl_promptset(const std::vector<Json>& records, PromptsetMode mode) {
  PromptsetResult result;
  std::unordered_set<std::string> ids;
  for (const auto& r : records) {
    ++result.seen;
    const auto gold = r.find("gold");
    if (gold == r.end() || !gold->is_string()) {
      ++result.skipped;
      result.warnings.push_back("record " + std::to_string(result.seen) + ": missing gold");
      continue;
    }
    if (auto id = r.find("problem_id"); id != r.end() && id->is_string()) {
      if (!ids.insert(id->get<std::string>()).second) {
        ++result.skipped;
        result.warnings.push_back("record " + std::to_string(result.seen) + ": repeated problem_id " +
                                  id->get<std::string>());
        continue;
      }
    }
    if (mode == PromptsetMode::Filtered && !short_form_filterable(gold->get<std::string>())) continue;
    result.kept.push_back(r);
  }
  return result;
}

namespace {

// --out file when given, the caller's stream otherwise.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw io::IoError("cannot write " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }
  void close() {
    stream_->flush();
    if (!*stream_) throw io::IoError("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

void report_warnings(const std::vector<io::JsonlWarning>& warnings, const std::string& path, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << path << ":" << w.line << ": " << w.message << "\n";
}

std::vector<Json> load_records(const std::string& path, std::ostream& err) {
  auto contents = io::read_jsonl_file(path);
  report_warnings(contents.warnings, path, err);
  return std::move(contents.records);
}

std::string require_string(const Json& r, const char* key, std::size_t index) {
  auto it = r.find(key);
  if (it == r.end() || !it->is_string()) {
    throw InputError("record " + std::to_string(index + 1) + ": missing string field \"" + key + "\"");
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const Json& r, const char* key) {
  auto it = r.find(key);
  if (it == r.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("not a number: " + item);
    }
    if (used != item.size()) throw ConfigError("not a number: " + item);
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

GlobalConfig load_config_or_default(const std::string& path) {
  return path.empty() ? GlobalConfig{} : load_global_config(path);
}

Json warning_json(const ConfigWarning& w) {
  std::string name;
  switch (w.constraint) {
    case OrderingConstraint::CorrectAboveWrong:
      name = "correct_above_wrong";
      break;
    case OrderingConstraint::ShorterCorrectBetter:
      name = "shorter_correct_better";
      break;
    case OrderingConstraint::ShorterWrongWorse:
      name = "shorter_wrong_worse";
      break;
  }
  return Json{{"constraint", name}, {"message", w.message}};
}

Json stats_json(const sim::IterationStats& s) {
  return Json{{"iter", s.iter},           {"accuracy", s.accuracy},       {"mean_len", s.mean_len},
              {"len_p50", s.len_p50},     {"len_p90", s.len_p90},         {"exceed_rate", s.exceed_rate},
              {"repeat_freq", s.repeat_freq}, {"branch_freq", s.branch_freq}, {"kl", s.kl}};
}

std::vector<Document> load_documents(const std::string& path, std::ostream& err) {
  const auto records = load_records(path, err);
  std::vector<Document> docs;
  docs.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::string id;
    if (auto it = r.find("id"); it != r.end() && it->is_string()) {
      id = it->get<std::string>();
    } else if (it != r.end() && it->is_number_integer()) {
      id = std::to_string(it->get<long long>());
    } else {
      throw InputError("record " + std::to_string(i + 1) + ": missing \"id\"");
    }
    docs.push_back(Document{std::move(id), require_string(r, "text", i)});
  }
  return docs;
}

std::vector<std::string> load_phrases(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io::IoError("cannot open " + path);
  std::vector<std::string> phrases;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
    phrases.push_back(line);
  }
  return phrases;
}

std::unique_ptr<llm::CompletionClient> make_client(const std::string& mock_script, const GlobalConfig& cfg,
                                                   const std::string& url_override) {
  if (!mock_script.empty()) return std::make_unique<llm::MockClient>(llm::MockClient::from_jsonl(mock_script));
  llm::EndpointSettings settings = cfg.endpoint;
  if (!url_override.empty()) {
    settings.url = url_override;
  } else if (settings.url.empty()) {
    const char* env = std::getenv("COTFORGE_LLM_ENDPOINT");
    if (!env || !*env) throw ConfigError("no endpoint: set COTFORGE_LLM_ENDPOINT or pass --mock-script");
    settings.url = env;
  }
  if (const char* token = std::getenv("COTFORGE_LLM_TOKEN")) settings.token = token;
  try {
    return std::make_unique<llm::HttpClient>(settings);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reward shaping, verification and simulation tools for long chain-of-thought training", "cotforge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", config_path, "Global JSON config");
    if (with_out) sub->add_option("--out", out_path, "Write output here instead of standard output");
  };

  // reward
  auto* reward = app.add_subcommand("reward", "Length-shaped correctness rewards");
  reward->require_subcommand(1);
  std::string preset_name;
  std::optional<long> max_length;
  long length = 0;
  bool correct = false;
  std::string scheme = "cosine";
  std::string label_text;
  auto* reward_eval = reward->add_subcommand("eval", "Print the reward for one (correctness, length) pair");
  add_common(reward_eval, false);
  reward_eval->add_option("--preset", preset_name, "default, reward_a, reward_b or reward_c");
  reward_eval->add_option("--max-length", max_length, "Context cap L_max in tokens");
  reward_eval->add_option("--length", length, "Generated length in tokens")->required()->check(CLI::NonNegativeNumber);
  reward_eval->add_flag("--correct", correct, "The answer is correct");
  reward_eval->add_option("--scheme", scheme, "cosine, classic or three_way")
      ->check(CLI::IsMember({"cosine", "classic", "three_way"}));
  reward_eval->add_option("--label", label_text, "correct, wrong or no_answer (three_way scheme)");
  auto* reward_validate = reward->add_subcommand("validate", "Report ordering-constraint violations of a preset");
  add_common(reward_validate, false);
  reward_validate->add_option("--preset", preset_name, "Preset to check");
  reward_validate->add_option("--max-length", max_length, "Context cap L_max in tokens");

  // penalty
  auto* penalty = app.add_subcommand("penalty", "N-gram repetition penalty per token");
  add_common(penalty, true);
  std::optional<std::size_t> ngram_n;
  std::optional<double> ngram_p;
  std::string tokens_file;
  penalty->add_option("--n", ngram_n, "N-gram size (default 40)");
  penalty->add_option("--p", ngram_p, "Penalty per repeated position (default -0.05)");
  penalty->add_option("--tokens-file", tokens_file, "JSONL of {\"tokens\": [...]} records")->required();

  // advantage
  auto* advantage = app.add_subcommand("advantage", "Advantages with one discount per reward channel");
  add_common(advantage, true);
  std::string gammas_text;
  std::optional<double> lambda;
  std::string input_path;
  advantage->add_option("--gammas", gammas_text, "Comma-separated discount per channel");
  advantage->add_option("--lambda", lambda, "GAE lambda (single channel only when != 1)");
  advantage->add_option("--input", input_path, "JSONL of {\"rewards\": [[...]...], \"values\": [...]}")->required();

  // grade
  auto* grade_cmd = app.add_subcommand("grade", "Rule-based grading against gold answers");
  add_common(grade_cmd, true);
  std::size_t workers = 1;
  grade_cmd->add_option("--input", input_path, "JSONL of {problem_id, gold, response}")->required();
  grade_cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  // filter
  auto* filter = app.add_subcommand("filter", "Dataset filters");
  filter->require_subcommand(1);
  auto* filter_rejection = filter->add_subcommand("rejection", "Keep correct responses (rejection sampling)");
  add_common(filter_rejection, true);
  std::optional<std::size_t> keep_per_prompt;
  filter_rejection->add_option("--input", input_path, "JSONL of {problem_id, gold, response}")->required();
  filter_rejection->add_option("--keep-per-prompt", keep_per_prompt, "At most this many per problem_id");
  auto* filter_promptset = filter->add_subcommand("promptset", "Build an RL prompt set");
  add_common(filter_promptset, true);
  std::string mode_text = "filtered";
  filter_promptset->add_option("--input", input_path, "JSONL of {problem_id, prompt, gold}")->required();
  filter_promptset->add_option("--mode", mode_text, "filtered or unfiltered")
      ->check(CLI::IsMember({"filtered", "unfiltered"}));

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Keyword, branching, coding and length statistics");
  add_common(analyze, true);
  bool keywords_default = false;
  std::string keywords_text;
  std::size_t analyze_max_length = 16384;
  analyze->add_flag("--keywords-default", keywords_default, "Track the default reflection keywords");
  analyze->add_option("--keywords", keywords_text, "Comma-separated keywords (replaces the defaults)");
  analyze->add_option("--max-length", analyze_max_length, "Context cap for the terminated rate")
      ->check(CLI::PositiveNumber);
  analyze->add_option("responses", input_path, "JSONL of {id, text, token_length}")->required();

  // dedup
  auto* dedup = app.add_subcommand("dedup", "MinHash/LSH near-duplicate clustering");
  add_common(dedup, true);
  std::optional<std::size_t> k_opt, hashes_opt, bands_opt, rows_opt, workers_opt;
  std::optional<double> threshold_opt;
  dedup->add_option("--input", input_path, "JSONL of {id, text}")->required();
  dedup->add_option("--k", k_opt, "Words per shingle (default 5)");
  dedup->add_option("--num-hashes", hashes_opt, "Signature lanes (default 128)");
  dedup->add_option("--bands", bands_opt, "LSH bands (default 16)");
  dedup->add_option("--rows", rows_opt, "Rows per band (default 8)");
  dedup->add_option("--threshold", threshold_opt, "Estimated Jaccard needed to link (default 0.8)");
  dedup->add_option("--seed", seed, "Hash seed");
  dedup->add_option("--workers", workers_opt, "Signature worker threads");

  // mine
  auto* mine = app.add_subcommand("mine", "Fuzzy phrase search over a corpus");
  add_common(mine, true);
  std::string phrases_file;
  mine->add_option("--input", input_path, "JSONL of {id, text}")->required();
  mine->add_option("--phrases-file", phrases_file, "One phrase per line (default: shipped list)");
  mine->add_option("--k", k_opt, "Words per shingle (default 2)");
  mine->add_option("--num-hashes", hashes_opt, "Signature lanes (default 128)");
  mine->add_option("--threshold", threshold_opt, "Minimum score (default 0.5)");
  mine->add_option("--seed", seed, "Hash seed");
  mine->add_option("--workers", workers_opt, "Worker threads");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Train the tabular policy on the toy chain-of-thought task");
  std::string sim_config_path;
  std::string sim_preset;
  std::optional<std::size_t> iterations_opt;
  simulate->add_option("--config", sim_config_path, "Simulator JSON config");
  simulate->add_option("--preset", sim_preset, "Shipped preset name (data/presets/<name>.json)");
  simulate->add_option("--out", out_path, "Stats JSONL (default standard output)");
  simulate->add_option("--seed", seed, "Run seed");
  simulate->add_option("--iterations", iterations_opt, "Policy updates");
  simulate->add_option("--workers", workers_opt, "Rollout worker threads");

  // orchestrate
  auto* orchestrate = app.add_subcommand("orchestrate", "LLM-backed verification, extraction and action prompting");
  add_common(orchestrate, true);
  std::string orch_mode;
  std::string mock_script;
  std::string reflection_mock;
  std::string reflection_endpoint;
  std::size_t max_steps = 32;
  orchestrate->add_option("--mode", orch_mode, "verify, extract or act")
      ->required()
      ->check(CLI::IsMember({"verify", "extract", "act"}));
  orchestrate->add_option("--mock-script", mock_script, "JSONL of canned replies; no network when set");
  orchestrate->add_option("--reflection-mock-script", reflection_mock, "Separate canned replies for reflection");
  orchestrate->add_option("--reflection-endpoint", reflection_endpoint, "Separate endpoint for reflection");
  orchestrate->add_option("--input", input_path, "JSONL of requests")->required();
  orchestrate->add_option("--max-steps", max_steps, "Action cap per problem (act mode)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (reward_eval->parsed()) {
      auto cfg = load_config_or_default(config_path);
      RewardConfig rc = cfg.reward;
      if (!preset_name.empty()) rc = preset(preset_name, rc.max_length);
      if (max_length) rc.max_length = *max_length;
      rc.check();
      double value = 0.0;
      if (scheme == "cosine") {
        value = cosine_reward(correct, length, rc);
      } else if (scheme == "classic") {
        value = classic_reward(correct);
      } else {
        const auto label = label_text.empty() ? (correct ? CorrectnessLabel::Correct : CorrectnessLabel::Wrong)
                                              : parse_label(label_text);
        value = three_way_reward(label);
      }
      out << io::format_double(value) << "\n";
      return kExitOk;
    }
    if (reward_validate->parsed()) {
      auto cfg = load_config_or_default(config_path);
      RewardConfig rc = cfg.reward;
      std::string name = cfg.reward_preset;
      if (!preset_name.empty()) {
        rc = preset(preset_name, rc.max_length);
        name = preset_name;
      }
      if (max_length) rc.max_length = *max_length;
      rc.check();
      Json warnings = Json::array();
      for (const auto& w : validate_config(rc)) warnings.push_back(warning_json(w));
      out << Json{{"preset", name}, {"warnings", warnings}}.dump() << "\n";
      return kExitOk;
    }
    if (penalty->parsed()) {
      auto cfg = load_config_or_default(config_path);
      const std::size_t n = ngram_n.value_or(cfg.repetition_n);
      const double p = ngram_p.value_or(cfg.repetition_p);
      if (n == 0) throw ConfigError("--n must be >= 1");
      const auto records = load_records(tokens_file, err);
      Output o(out_path, out);
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        auto it = r.find("tokens");
        if (it == r.end() || !it->is_array()) throw InputError("record " + std::to_string(i + 1) + ": missing tokens");
        TokenSequence seq;
        try {
          seq.tokens = it->get<std::vector<TokenId>>();
        } catch (const Json::exception&) {
          throw InputError("record " + std::to_string(i + 1) + ": tokens must be nonnegative integers");
        }
        seq.active_length = r.value("active_length", seq.tokens.size());
        seq.max_length = r.value("max_length", seq.tokens.size());
        Json line{{"penalty", ngram_repetition_penalty(seq, n, p).values}};
        if (r.contains("id")) line["id"] = r["id"];
        io::write_jsonl_line(*o, line);
      }
      o.close();
      return kExitOk;
    }
    if (advantage->parsed()) {
      auto cfg = load_config_or_default(config_path);
      const auto gammas = gammas_text.empty() ? std::vector<double>{cfg.gamma_correct, cfg.gamma_penalty}
                                              : parse_double_list(gammas_text);
      const double lam = lambda.value_or(cfg.lambda);
      if (!(lam >= 0.0 && lam <= 1.0)) throw ConfigError("--lambda must lie in [0, 1]");
      if (lam != 1.0 && gammas.size() != 1) throw ConfigError("--lambda != 1 needs exactly one channel");
      const auto records = load_records(input_path, err);
      Output o(out_path, out);
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        std::vector<std::vector<double>> rewards;
        std::vector<double> values;
        try {
          rewards = r.at("rewards").get<std::vector<std::vector<double>>>();
          values = r.at("values").get<std::vector<double>>();
        } catch (const Json::exception&) {
          throw InputError("record " + std::to_string(i + 1) + ": need \"rewards\" (array of arrays) and \"values\"");
        }
        if (rewards.size() != gammas.size()) {
          throw InputError("record " + std::to_string(i + 1) + ": " + std::to_string(rewards.size()) +
                           " channels but " + std::to_string(gammas.size()) + " discounts");
        }
        std::vector<ChannelTrace> channels;
        for (std::size_t m = 0; m < rewards.size(); ++m) channels.push_back(ChannelTrace{rewards[m], gammas[m]});
        Json line;
        if (lam != 1.0) {
          line["advantages"] = gae_single(channels[0].rewards, values, gammas[0], lam);
        } else {
          line["advantages"] = multi_channel_advantage(channels, values);
          line["returns"] = multi_channel_return(channels);
        }
        if (r.contains("id")) line["id"] = r["id"];
        io::write_jsonl_line(*o, line);
      }
      o.close();
      return kExitOk;
    }
    if (grade_cmd->parsed()) {
      auto records = load_records(input_path, err);
      std::vector<std::optional<Json>> graded(records.size());
      std::vector<std::string> problems(records.size());
      parallel_for(records.size(), workers, [&](std::size_t i) {
        auto& r = records[i];
        const auto id = optional_string(r, "problem_id");
        const auto gold = optional_string(r, "gold");
        const auto response = optional_string(r, "response");
        if (!id || !gold || !response) {
          problems[i] = "record " + std::to_string(i + 1) + ": needs problem_id, gold and response strings";
          return;
        }
        const auto g = grade_record(*id, *response, *gold);
        Json o = r;
        o["label"] = std::string(to_string(g.label));
        o["extracted"] = g.extracted ? Json(*g.extracted) : Json(nullptr);
        graded[i] = std::move(o);
      });
      Output o(out_path, out);
      std::size_t skipped = 0;
      for (std::size_t i = 0; i < graded.size(); ++i) {
        if (graded[i]) {
          io::write_jsonl_line(*o, *graded[i]);
        } else {
          err << "warning: " << problems[i] << "\n";
          ++skipped;
        }
      }
      o.close();
      err << Json{{"seen", records.size()}, {"graded", records.size() - skipped}, {"skipped", skipped}}.dump()
          << "\n";
      return kExitOk;
    }
    if (filter_rejection->parsed()) {
      const auto records = load_records(input_path, err);
      std::vector<CandidateRecord> candidates;
      candidates.reserve(records.size());
      for (const auto& r : records) {
        candidates.push_back(CandidateRecord{optional_string(r, "problem_id").value_or(""),
                                             optional_string(r, "gold").value_or(""),
                                             optional_string(r, "response").value_or("")});
      }
      const auto result = rejection_filter(candidates, keep_per_prompt);
      Output o(out_path, out);
      for (const auto& g : result.kept) {
        io::write_jsonl_line(*o, Json{{"problem_id", g.problem_id},
                                      {"response", g.response_text},
                                      {"label", std::string(to_string(g.label))},
                                      {"extracted", g.extracted ? Json(*g.extracted) : Json(nullptr)}});
      }
      o.close();
      err << Json{{"seen", result.seen}, {"kept", result.kept.size()}, {"malformed", result.malformed}}.dump()
          << "\n";
      return kExitOk;
    }
    if (filter_promptset->parsed()) {
      const auto records = load_records(input_path, err);
      const auto mode = mode_text == "filtered" ? PromptsetMode::Filtered : PromptsetMode::Unfiltered;
      const auto result = build_rl_promptset(records, mode);
      for (const auto& w : result.warnings) err << "warning: " << w << "\n";
      Output o(out_path, out);
      io::write_jsonl(*o, result.kept);
      o.close();
      err << Json{{"mode", mode_text},
                  {"seen", result.seen},
                  {"kept", result.kept.size()},
                  {"skipped", result.skipped},
                  {"ratio", result.ratio()}}
                 .dump()
          << "\n";
      return kExitOk;
    }
    if (analyze->parsed()) {
      const auto records = load_records(input_path, err);
      ResponseBatch batch;
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        Response resp;
        resp.text = require_string(r, "text", i);
        resp.id = optional_string(r, "id").value_or(std::to_string(i + 1));
        if (auto it = r.find("token_length"); it != r.end()) {
          if (!it->is_number_unsigned()) throw InputError("record " + std::to_string(i + 1) + ": bad token_length");
          resp.token_length = it->get<std::size_t>();
        } else {
          std::istringstream words(resp.text);
          resp.token_length = static_cast<std::size_t>(
              std::distance(std::istream_iterator<std::string>(words), std::istream_iterator<std::string>()));
        }
        batch.push_back(std::move(resp));
      }
      auto keywords = keywords_text.empty() ? default_keywords() : split_commas(keywords_text);
      if (keywords.empty()) throw ConfigError("--keywords is empty");
      (void)keywords_default;
      Json report{{"count", batch.size()}};
      Json kw = Json::array();
      for (const auto& k : keyword_rates(batch, keywords).rates) {
        kw.push_back(Json{{"keyword", k.keyword}, {"contain_fraction", k.contain_fraction}, {"mean_count", k.mean_count}});
      }
      report["keywords"] = kw;
      if (!batch.empty()) {
        std::size_t total = 0;
        for (const auto& r : batch) total += branching_frequency(r.text);
        report["branching"] = Json{{"total", total}, {"mean", static_cast<double>(total) / batch.size()}};
        report["coding_rate"] = coding_rate(batch);
        const auto ls = length_stats(batch, analyze_max_length);
        report["length"] = Json{{"mean", ls.mean},
                                {"median", ls.median},
                                {"max", ls.max},
                                {"terminated_rate", ls.terminated_rate},
                                {"max_length", analyze_max_length}};
      }
      Output o(out_path, out);
      *o << report.dump(2) << "\n";
      o.close();
      return kExitOk;
    }
    if (dedup->parsed()) {
      auto cfg = load_config_or_default(config_path);
      auto params = cfg.dedup;
      if (k_opt) params.k = *k_opt;
      if (hashes_opt) params.num_hashes = *hashes_opt;
      if (bands_opt) params.bands = *bands_opt;
      if (rows_opt) params.rows = *rows_opt;
      if (threshold_opt) params.threshold = *threshold_opt;
      if (seed) params.seed = *seed;
      if (workers_opt) params.workers = *workers_opt;
      try {
        params.check();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      const auto docs = load_documents(input_path, err);
      const auto clusters = lsh_dedup(docs, params);
      Output o(out_path, out);
      for (const auto& c : clusters) {
        io::write_jsonl_line(*o, Json{{"representative", c.representative}, {"members", c.members}});
      }
      o.close();
      err << Json{{"documents", docs.size()}, {"clusters", clusters.size()}, {"removed", docs.size() - clusters.size()}}
                 .dump()
          << "\n";
      return kExitOk;
    }
    if (mine->parsed()) {
      auto cfg = load_config_or_default(config_path);
      auto params = cfg.mine;
      if (k_opt) params.k = *k_opt;
      if (hashes_opt) params.num_hashes = *hashes_opt;
      if (threshold_opt) params.threshold = *threshold_opt;
      if (seed) params.seed = *seed;
      if (workers_opt) params.workers = *workers_opt;
      if (params.k == 0 || params.num_hashes == 0) throw ConfigError("--k and --num-hashes must be >= 1");
      const auto phrases = load_phrases(phrases_file.empty() ? data_dir() + "/phrases.txt" : phrases_file);
      if (phrases.empty()) throw InputError("phrase file is empty");
      const auto docs = load_documents(input_path, err);
      Output o(out_path, out);
      for (const auto& m : phrase_mine(docs, phrases, params)) {
        io::write_jsonl_line(*o, Json{{"doc_id", m.doc_id}, {"phrase", m.phrase}, {"score", m.score}});
      }
      o.close();
      return kExitOk;
    }
    if (simulate->parsed()) {
      if (!sim_config_path.empty() && !sim_preset.empty()) throw ConfigError("use either --config or --preset");
      std::vector<SimRun> runs{SimRun{}};
      if (!sim_config_path.empty()) {
        runs = load_sim_plan(sim_config_path);
      } else if (!sim_preset.empty()) {
        runs = load_sim_plan(data_dir() + "/presets/" + sim_preset + ".json");
      }
      Output o(out_path, out);
      for (auto& run : runs) {
        if (seed) run.config.seed = *seed;
        if (iterations_opt) run.config.iterations = *iterations_opt;
        if (workers_opt) run.config.workers = *workers_opt;
        sim::run_experiment(run.config, [&](const sim::IterationStats& s) {
          auto line = stats_json(s);
          if (!run.swept_key.empty()) line[run.swept_key] = run.swept_value;
          io::write_jsonl_line(*o, line);
        });
      }
      o.close();
      return kExitOk;
    }
    if (orchestrate->parsed()) {
      auto cfg = load_config_or_default(config_path);
      auto client = make_client(mock_script, cfg, "");
      std::unique_ptr<llm::CompletionClient> reflection_client;
      if (!reflection_mock.empty() || !reflection_endpoint.empty()) {
        reflection_client = make_client(reflection_mock, cfg, reflection_endpoint);
      }
      const auto records = load_records(input_path, err);
      Output o(out_path, out);
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        Json line;
        if (orch_mode == "verify") {
          const auto v = llm::model_verify(require_string(r, "response", i), require_string(r, "reference", i), *client);
          for (const auto& d : v.diagnostics) err << "warning: record " << i + 1 << ": " << d << "\n";
          line = Json{{"label", std::string(to_string(v.label))}, {"attempts", v.attempts}};
        } else if (orch_mode == "extract") {
          const auto a = llm::llm_extract_answer(require_string(r, "problem", i), require_string(r, "solution", i),
                                                 *client);
          line = Json{{"answer", a ? Json(*a) : Json(nullptr)}};
        } else {
          llm::ActionOptions opts;
          opts.max_steps = max_steps;
          opts.reflection_client = reflection_client.get();
          if (auto fmt = optional_string(r, "format")) opts.answer_format = *fmt;
          const auto log = llm::run_action_machine(require_string(r, "problem", i), *client, opts);
          for (const auto& d : log.diagnostics) err << "note: record " << i + 1 << ": " << d << "\n";
          Json thoughts = Json::array();
          for (const auto& t : log.thoughts) {
            thoughts.push_back(Json{{"action", std::string(llm::to_string(t.action))}, {"text", t.text}, {"forced", t.forced}});
          }
          line = Json{{"thoughts", thoughts}, {"terminal", log.terminal}, {"alternatives", log.alternatives}};
        }
        if (r.contains("id")) line["id"] = r["id"];
        io::write_jsonl_line(*o, line);
      }
      o.close();
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::out_of_range& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const io::IoError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const llm::CompletionError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  }
  err << app.help();
  return kExitConfig;
}

}  // namespace cotforge::cli
