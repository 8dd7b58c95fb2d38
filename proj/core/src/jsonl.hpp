#pragma once

// Line-oriented JSON helpers shared by the loaders. Not installed.

#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "crowdguard/error.hpp"

namespace crowdguard::jsonl {

using nlohmann::json;

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  return in;
}

inline bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

// Calls fn(record, line_number) for each non-blank line.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::parse, e.what(), line_no);
    }
    if (!record.is_object()) throw Error(ErrorCode::parse, "record is not an object", line_no);
    fn(record, line_no);
  }
}

inline const json& field(const json& record, const char* name, std::size_t line_no) {
  auto it = record.find(name);
  if (it == record.end()) {
    throw Error(ErrorCode::missing_field, std::string("missing field '") + name + "'", line_no);
  }
  return *it;
}

inline std::string string_field(const json& record, const char* name, std::size_t line_no) {
  const json& v = field(record, name, line_no);
  if (!v.is_string()) {
    throw Error(ErrorCode::parse, std::string("field '") + name + "' must be a string", line_no);
  }
  return v.get<std::string>();
}

inline bool bool_field(const json& record, const char* name, std::size_t line_no) {
  const json& v = field(record, name, line_no);
  if (!v.is_boolean()) {
    throw Error(ErrorCode::parse, std::string("field '") + name + "' must be a boolean", line_no);
  }
  return v.get<bool>();
}

}  // namespace crowdguard::jsonl
