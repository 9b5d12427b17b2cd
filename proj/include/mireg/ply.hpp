#pragma once

#include <string>

#include "mireg/types.hpp"

namespace mireg {

// Reads ascii or binary_little_endian PLY. Recognized vertex properties:
// x y z (required), nx ny nz, curvature, label. Unknown properties are
// skipped; unknown elements after vertex are rejected.
PointCloud read_ply(const std::string& path);

// Writes x y z plus whichever optional attributes the cloud carries.
void write_ply(const PointCloud& cloud, const std::string& path, bool binary = true);

}  // namespace mireg
