#pragma once

#include <filesystem>
#include <string>

#include "narrownet/regions.hpp"

namespace narrownet {

// Binary PGM ("P5"), one pixel per cell, x1 to the right and x2 upwards.
// Each class gets a fixed gray level, tie cells are black and cells on a
// component boundary are drawn dark. Requires a labeled 2-D grid.
std::string render_pgm(const LabeledGrid& grid);

// SVG with one filled path group per component and a stroked outline of
// all component boundaries.
std::string render_svg(const LabeledGrid& grid);

// Picks the format from the extension (.pgm or .svg) and writes atomically.
void render_2d(const LabeledGrid& grid, const std::filesystem::path& path);

// Gray level used for class `cls` out of `num_classes`.
unsigned char class_gray_level(int cls, std::size_t num_classes);

}  // namespace narrownet
