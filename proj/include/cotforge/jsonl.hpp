#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cotforge::io {

using Json = nlohmann::json;

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct JsonlWarning {
  std::size_t line = 0;  // 1-based
  std::string message;
};

// Calls on_record for every line holding a JSON object, in order. Blank lines
// are ignored; other lines are skipped and reported through on_warning.
void stream_jsonl(std::istream& in, const std::function<void(Json&&, std::size_t line)>& on_record,
                  const std::function<void(const JsonlWarning&)>& on_warning);

struct JsonlContents {
  std::vector<Json> records;
  std::vector<JsonlWarning> warnings;
};

JsonlContents read_jsonl(std::istream& in);
// Throws IoError when the file cannot be opened.
JsonlContents read_jsonl_file(const std::string& path);

// One compact object per line, keys sorted, newline terminated.
void write_jsonl_line(std::ostream& out, const Json& record);
void write_jsonl(std::ostream& out, const std::vector<Json>& records);
// Throws IoError when the file cannot be written.
void write_jsonl_file(const std::string& path, const std::vector<Json>& records);

// Shortest round-trip text; integral values keep a ".0" suffix ("2.0").
std::string format_double(double value);

}  // namespace cotforge::io
