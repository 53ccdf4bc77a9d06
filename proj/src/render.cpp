#include "narrownet/render.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "narrownet/error.hpp"

namespace narrownet {

namespace {

constexpr unsigned char kOutlineLevel = 40;
constexpr std::array<const char*, 8> kPalette{"#3b6fb6", "#e8873a", "#4fa45a", "#c94c4c",
                                              "#8c6bb1", "#8c564b", "#d17fbf", "#7f7f7f"};

void require_2d(const LabeledGrid& grid) {
  if (grid.dim() != 2) throw UnsupportedError("rendering requires a 2-D grid");
  if (grid.cell_class.size() != grid.resolution * grid.resolution)
    throw InputError("grid cell count does not match its resolution");
}

std::size_t class_count(const LabeledGrid& grid) {
  int m = -1;
  for (int c : grid.cell_class) m = std::max(m, c);
  return static_cast<std::size_t>(std::max(m + 1, 2));
}

// Flat index of cell (i along x1, j along x2).
std::size_t cell(const LabeledGrid& g, std::size_t i, std::size_t j) { return i * g.resolution + j; }

bool on_component_edge(const LabeledGrid& g, std::size_t i, std::size_t j) {
  const int comp = g.cell_component[cell(g, i, j)];
  const std::size_t r = g.resolution;
  if (i + 1 < r && g.cell_component[cell(g, i + 1, j)] != comp) return true;
  if (j + 1 < r && g.cell_component[cell(g, i, j + 1)] != comp) return true;
  return false;
}

}  // namespace

unsigned char class_gray_level(int cls, std::size_t num_classes) {
  if (cls < 0) return 0;
  // Spread classes over [96, 240], clear of the outline and tie levels.
  const double step = 144.0 / static_cast<double>(std::max<std::size_t>(num_classes - 1, 1));
  return static_cast<unsigned char>(96.0 + step * static_cast<double>(cls) + 0.5);
}

std::string render_pgm(const LabeledGrid& grid) {
  require_2d(grid);
  const std::size_t r = grid.resolution;
  const std::size_t classes = class_count(grid);
  std::string out = "P5\n" + std::to_string(r) + " " + std::to_string(r) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + r * r);
  for (std::size_t row = 0; row < r; ++row) {
    const std::size_t j = r - 1 - row;  // top row is the largest x2
    for (std::size_t i = 0; i < r; ++i) {
      const int cls = grid.cell_class[cell(grid, i, j)];
      unsigned char level = class_gray_level(cls, classes);
      if (cls >= 0 && on_component_edge(grid, i, j)) level = kOutlineLevel;
      out[header + row * r + i] = static_cast<char>(level);
    }
  }
  return out;
}

std::string render_svg(const LabeledGrid& grid) {
  require_2d(grid);
  const std::size_t r = grid.resolution;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << r << "\" height=\"" << r << "\" viewBox=\"0 0 "
      << r << " " << r << "\" shape-rendering=\"crispEdges\">\n";
  svg << "<desc>box x1=[" << grid.box.lo[0] << "," << grid.box.hi[0] << "] x2=[" << grid.box.lo[1] << ","
      << grid.box.hi[1] << "] resolution=" << r << "</desc>\n";

  // Horizontal runs per component, one path per component.
  std::vector<std::ostringstream> paths(grid.components.size());
  for (std::size_t row = 0; row < r; ++row) {
    const std::size_t j = r - 1 - row;
    std::size_t i = 0;
    while (i < r) {
      const int comp = grid.cell_component[cell(grid, i, j)];
      std::size_t end = i + 1;
      while (end < r && grid.cell_component[cell(grid, end, j)] == comp) ++end;
      if (comp >= 0)
        paths[static_cast<std::size_t>(comp)] << "M" << i << " " << row << "h" << (end - i) << "v1h-" << (end - i)
                                                << "z";
      i = end;
    }
  }
  for (const auto& c : grid.components) {
    svg << "<g id=\"component-" << c.id << "\" class=\"class-" << c.cls << "\" fill=\""
        << kPalette[static_cast<std::size_t>(c.cls) % kPalette.size()] << "\">\n"
        << "<path d=\"" << paths[static_cast<std::size_t>(c.id)].str() << "\"/>\n</g>\n";
  }

  // Outline: unit edges between cells of different components.
  std::ostringstream edges;
  for (std::size_t row = 0; row < r; ++row) {
    const std::size_t j = r - 1 - row;
    for (std::size_t i = 0; i < r; ++i) {
      const int comp = grid.cell_component[cell(grid, i, j)];
      if (i + 1 < r && grid.cell_component[cell(grid, i + 1, j)] != comp) edges << "M" << (i + 1) << " " << row << "v1";
      if (j > 0 && grid.cell_component[cell(grid, i, j - 1)] != comp) edges << "M" << i << " " << (row + 1) << "h1";
    }
  }
  svg << "<path d=\"" << edges.str() << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

void render_2d(const LabeledGrid& grid, const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm")
    write_file_atomic(path, render_pgm(grid));
  else if (ext == ".svg")
    write_file_atomic(path, render_svg(grid));
  else
    throw InputError("render: unsupported image extension '" + ext + "' (use .pgm or .svg)");
}

}  // namespace narrownet
