#include "sensery/model_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sensery/error.hpp"

namespace sensery {

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void seal(nlohmann::ordered_json& doc) {
  doc.erase("checksum");
  doc["checksum"] = "fnv1a64:" + fnv1a64_hex(doc.dump());
}

void verify_seal(const nlohmann::ordered_json& doc, const std::string& source) {
  auto it = doc.find("checksum");
  if (it == doc.end() || !it->is_string()) {
    throw ValidationError(source + ": model file has no checksum");
  }
  nlohmann::ordered_json body = doc;
  body.erase("checksum");
  const std::string expected = "fnv1a64:" + fnv1a64_hex(body.dump());
  if (it->get<std::string>() != expected) {
    throw ValidationError(source + ": checksum mismatch (file corrupted or edited)");
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::ordered_json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string model_kind(const nlohmann::ordered_json& doc) {
  auto it = doc.find("model");
  if (it == doc.end() || !it->is_string()) throw ValidationError("not a sensery model file");
  return it->get<std::string>();
}

}  // namespace sensery
