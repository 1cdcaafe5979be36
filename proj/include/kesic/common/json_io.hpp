#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "kesic/common/result.hpp"

namespace kesic {

using Json = nlohmann::ordered_json;

Result<Json> parse_json(std::string_view text);
Result<Json> read_json_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over the target, so readers
// never observe a half-written file.
Status write_file_atomic(const std::filesystem::path& path, std::string_view contents,
                         bool owner_only = false);

}  // namespace kesic
