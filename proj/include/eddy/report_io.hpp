#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace eddy {

inline constexpr std::string_view kArtifactVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;

/// %.17g, which round-trips every double. Non-finite values become "nan",
/// "inf" or "-inf".
std::string format_double(double x);

/// Pretty-prints json with two-space indentation. Floating-point numbers use
/// format_double (non-finite ones become null); object keys keep insertion
/// order only if the json is ordered, otherwise they are sorted.
std::string dump_json(const nlohmann::json& value);

/// Writes `contents` to `path`, creating parent directories. Throws
/// std::runtime_error on failure.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace eddy
