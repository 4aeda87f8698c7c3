#pragma once

#include <filesystem>
#include <string>

#include "mrfno/grid.hpp"

namespace mrfno {

/// Binary container for a DiscretizedFunction: header (axes, extents,
/// spacing, channels) followed by row-major, channels-last float64 values.
/// Round-trips are bit exact. A JSON sidecar `<path>.json` carries the
/// resolution index when one is set.
void save_function(const DiscretizedFunction& f, const std::filesystem::path& path);
DiscretizedFunction load_function(const std::filesystem::path& path);

/// Raw little-endian float64 vector files (model checkpoints).
void save_doubles(const Eigen::VectorXd& v, const std::filesystem::path& path);
Eigen::VectorXd load_doubles(const std::filesystem::path& path);

/// Whole-file helpers.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace mrfno
