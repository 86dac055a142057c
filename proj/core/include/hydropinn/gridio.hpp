/// @file gridio.hpp
/// @brief The "F32F" grid file format: magic, u32 rows, u32 cols, f32
/// spacing, then rows*cols float32 cell values, row-major, little-endian.
/// Masks are stored as 0/1 grids.

#pragma once

#include <string>

#include "hydropinn/field.hpp"

namespace hydropinn {

void write_grid(const std::string& path, const Field2D& f);
[[nodiscard]] Field2D read_grid(const std::string& path);

void write_mask(const std::string& path, const BitMask2D& m, double spacing);
[[nodiscard]] BitMask2D read_mask(const std::string& path);

}  // namespace hydropinn
