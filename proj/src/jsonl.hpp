#pragma once

// Internal JSONL helpers shared by the file-format readers and writers.

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "gist/errors.hpp"

namespace gist::jsonl {

using json = nlohmann::ordered_json;

/// Calls fn(record, line_number) for every nonblank line. Parse failures and
/// exceptions from fn that are not already gist errors become DataErrors
/// naming the file and line.
inline void for_each(const std::filesystem::path& path,
                     const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON (" +
                      e.what() + ")");
    }
    try {
      fn(record, line_no);
    } catch (const Error&) {
      throw;
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::string field_error(const std::filesystem::path& path, std::size_t line_no,
                               const std::string& msg) {
  return path.string() + ":" + std::to_string(line_no) + ": " + msg;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

inline void write_line(std::ostream& os, const json& record) { os << record.dump() << '\n'; }

inline json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

}  // namespace gist::jsonl
