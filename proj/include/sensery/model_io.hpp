#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace sensery {

std::string fnv1a64_hex(std::string_view bytes);

// Appends "checksum" computed over the compact dump of everything else.
void seal(nlohmann::ordered_json& doc);
// Throws ValidationError when the checksum is missing or does not match.
void verify_seal(const nlohmann::ordered_json& doc, const std::string& source);

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& doc);
nlohmann::ordered_json read_json_file(const std::filesystem::path& path);

// "crf" or "lstm", read from a model file's "model" field.
std::string model_kind(const nlohmann::ordered_json& doc);

}  // namespace sensery
