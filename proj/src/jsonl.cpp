#include "cotforge/jsonl.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace cotforge::io {

void stream_jsonl(std::istream& in, const std::function<void(Json&&, std::size_t line)>& on_record,
                  const std::function<void(const JsonlWarning&)>& on_warning) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::parse_error& e) {
      on_warning({lineno, std::string("malformed JSON: ") + e.what()});
      continue;
    }
    if (!record.is_object()) {
      on_warning({lineno, "expected a JSON object"});
      continue;
    }
    on_record(std::move(record), lineno);
  }
  if (in.bad()) throw IoError("read error");
}

JsonlContents read_jsonl(std::istream& in) {
  JsonlContents out;
  stream_jsonl(
      in, [&](Json&& r, std::size_t) { out.records.push_back(std::move(r)); },
      [&](const JsonlWarning& w) { out.warnings.push_back(w); });
  return out;
}

JsonlContents read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_jsonl(in);
}

void write_jsonl_line(std::ostream& out, const Json& record) { out << record.dump() << '\n'; }

void write_jsonl(std::ostream& out, const std::vector<Json>& records) {
  for (const auto& r : records) write_jsonl_line(out, r);
}

void write_jsonl_file(const std::string& path, const std::vector<Json>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_jsonl(out, records);
  if (!out) throw IoError("write failed for " + path);
}

std::string format_double(double value) {
  if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

}  // namespace cotforge::io
