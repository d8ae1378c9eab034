#pragma once

#include <filesystem>
#include <string_view>

#include "dash/problems.hpp"

namespace dash {

/// Parses a TSPLIB TSP file with EDGE_WEIGHT_TYPE EUC_2D. Any other edge
/// weight type raises ErrorKind::UnsupportedFormat.
TspInstance parse_tsplib(std::string_view text);

/// parse_tsplib on a file; attaches the best-known tour length from a sidecar
/// `<stem>.opt` (a single number) when one sits next to the file.
TspInstance parse_tsplib_file(const std::filesystem::path& path);

}  // namespace dash
