#pragma once

#include <string>

#include "chaosot/binary_io.hpp"
#include "chaosot/dynamics.hpp"

namespace chaosot {

/// "CHA1", tag u8, 3 reserved bytes, T u64, m u64, dt f64, T*m f64 (little-endian).
io::Bytes encode_trajectory(const Trajectory& traj);
Trajectory decode_trajectory(const io::Bytes& bytes);

void save_trajectory(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory(const std::string& path);

}  // namespace chaosot
