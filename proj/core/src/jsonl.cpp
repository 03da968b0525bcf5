#include "jsonl.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "eccot/errors.hpp"

namespace eccot::io {

void data_error_at(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::exception& e) {
      data_error_at(path, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) data_error_at(path, line_no, "expected a JSON object");
    try {
      fn(record, line_no);
    } catch (const Error&) {
      throw;
    } catch (const Json::exception& e) {
      data_error_at(path, line_no, std::string("malformed record: ") + e.what());
    }
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw NumericError("cannot format number");
  return std::string(buf.data(), end);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace eccot::io
