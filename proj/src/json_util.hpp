#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "idmgym/errors.hpp"

namespace idmgym::detail {

using ojson = nlohmann::ordered_json;

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

inline ojson parse_json(const std::string& text, const std::string& source) {
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("{}: {}", source, e.what()));
  }
}

/// Fetches a required member of the given JSON type, or throws ParseError.
inline const ojson& member(const ojson& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(fmt::format("{}: missing '{}'", where, key));
  }
  return obj.at(key);
}

inline double number(const ojson& obj, const char* key, const std::string& where) {
  const auto& v = member(obj, key, where);
  if (!v.is_number()) throw ParseError(fmt::format("{}: '{}' must be a number", where, key));
  return v.get<double>();
}

inline std::string string(const ojson& obj, const char* key, const std::string& where) {
  const auto& v = member(obj, key, where);
  if (!v.is_string()) throw ParseError(fmt::format("{}: '{}' must be a string", where, key));
  return v.get<std::string>();
}

}  // namespace idmgym::detail
