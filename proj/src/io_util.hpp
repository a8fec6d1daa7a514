#ifndef WDR_SRC_IO_UTIL_HPP
#define WDR_SRC_IO_UTIL_HPP

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "wdr/types.hpp"

namespace wdr::io {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("failed writing " + path.string());
}

/// Parses a versioned model document and checks format_version and kind.
inline nlohmann::json parse_model_document(std::string_view document, std::string_view kind) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("corrupt " + std::string(kind) + " model file: " + e.what());
  }
  if (!doc.is_object()) throw FormatError("corrupt " + std::string(kind) + " model file: not an object");
  if (!doc.contains("format_version") || !doc["format_version"].is_number_integer()) {
    throw FormatError("corrupt " + std::string(kind) + " model file: missing format_version");
  }
  if (const auto v = doc["format_version"].get<long long>(); v != 1) {
    throw VersionError("unsupported " + std::string(kind) + " model format_version " + std::to_string(v) +
                       " (expected 1)");
  }
  if (!doc.contains("kind") || doc["kind"] != kind) {
    throw FormatError("model file is not of kind \"" + std::string(kind) + "\"");
  }
  return doc;
}

template <class T>
T require(const nlohmann::json& obj, const char* key, std::string_view context) {
  if (!obj.contains(key)) throw FormatError(std::string(context) + ": missing field \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string(context) + ": bad field \"" + key + "\": " + e.what());
  }
}

}  // namespace wdr::io

#endif  // WDR_SRC_IO_UTIL_HPP
