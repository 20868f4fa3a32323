#pragma once

#include <string>

#include "fastbat/param_vector.hpp"

namespace fastbat {

// Checkpoint file format: magic "FBAT", version byte 0x01, little-endian u32
// tensor count; per tensor: u32 name length, UTF-8 name, u32 rank, u32 dims,
// raw little-endian 32-bit float data.
void save_checkpoint(const std::string& path, const ParamVector& params);
ParamVector load_checkpoint(const std::string& path);

} // namespace fastbat
