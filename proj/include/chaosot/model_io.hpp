#pragma once

#include <string>

#include "chaosot/binary_io.hpp"
#include "chaosot/models.hpp"

namespace chaosot {

/// "CHM1", kind u8, layer count u16, widths u32 x (layers + 1), activation u8,
/// residual u8, radius u32, output rows u32, system tag u8, state dim u32,
/// then every parameter tensor in layer order as f64 (little-endian).
io::Bytes encode_model(const Model& model);
Model decode_model(const io::Bytes& bytes);

void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace chaosot
