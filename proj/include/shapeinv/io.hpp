#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "shapeinv/cloud.hpp"

namespace shapeinv {

/// One point per line, three whitespace-separated numbers; '#' starts a
/// comment and blank lines are skipped. Throws ParseError (with the line
/// number) or NonFinite.
PointCloud parse_xyz(std::string_view text);
/// Shortest decimal form that reads back to the same double.
std::string emit_xyz(const PointCloud& cloud);

/// ASCII PLY, vertex element only; the x, y, z properties are read and any
/// others skipped.
PointCloud parse_ply(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Dispatches on extension: .ply is PLY, anything else is xyz.
PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace shapeinv
