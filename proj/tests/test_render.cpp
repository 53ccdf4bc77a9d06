#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "narrownet/error.hpp"
#include "narrownet/regions.hpp"
#include "narrownet/render.hpp"

using namespace narrownet;

namespace {

// Splits "P5\nW H\n255\n<pixels>" into its size and pixel block.
struct Pgm {
  std::size_t w = 0, h = 0;
  std::string pixels;
};

Pgm parse_pgm(const std::string& s) {
  std::istringstream in(s);
  std::string magic;
  int maxval = 0;
  Pgm p;
  in >> magic >> p.w >> p.h >> maxval;
  REQUIRE(magic == "P5");
  REQUIRE(maxval == 255);
  in.get();
  p.pixels.assign(std::istreambuf_iterator<char>(in), {});
  return p;
}

unsigned char pixel_at(const Pgm& p, const Box& box, double x1, double x2) {
  const auto col = static_cast<std::size_t>((x1 - box.lo[0]) / (box.hi[0] - box.lo[0]) * static_cast<double>(p.w));
  const auto row = static_cast<std::size_t>((box.hi[1] - x2) / (box.hi[1] - box.lo[1]) * static_cast<double>(p.h));
  return static_cast<unsigned char>(p.pixels[row * p.w + col]);
}

}  // namespace

TEST_CASE("PGM header, size and byte stability") {
  const Network net = build_example_net(ExampleId::example1);
  const Box box = Box::cube(2, -1, 1);
  const LabeledGrid grid = analyze_grid(net, box, 128, 1);
  const std::string img = render_pgm(grid);
  const Pgm p = parse_pgm(img);
  CHECK(p.w == 128);
  CHECK(p.h == 128);
  CHECK(p.pixels.size() == 128 * 128);
  CHECK(render_pgm(analyze_grid(net, box, 128, 4)) == img);

  // Neg patches sit near (-1,-1) and (-1,1); the centre is pos.
  const unsigned char neg = class_gray_level(kNegClass, 2), pos = class_gray_level(kPosClass, 2);
  CHECK(neg != pos);
  CHECK(pixel_at(p, box, -0.95, -0.95) == neg);
  CHECK(pixel_at(p, box, -0.95, 0.95) == neg);
  CHECK(pixel_at(p, box, 0.1, 0.1) == pos);
}

TEST_CASE("vertical split renders two gray levels") {
  const Network split(Activation::relu(), {}, Layer{Matrix{{1, 0}}, Vector{0.0}});
  const LabeledGrid grid = analyze_grid(split, Box::cube(2, -1, 1), 16, 1);
  const Pgm p = parse_pgm(render_pgm(grid));
  std::set<unsigned char> levels;
  for (char c : p.pixels) levels.insert(static_cast<unsigned char>(c));
  // Two class levels plus the outline along the split.
  CHECK(levels.count(class_gray_level(kNegClass, 2)) == 1);
  CHECK(levels.count(class_gray_level(kPosClass, 2)) == 1);
  CHECK(levels.size() == 3);
  // Left half is neg, right half pos, row by row.
  for (std::size_t row = 0; row < 16; ++row) {
    CHECK(static_cast<unsigned char>(p.pixels[row * 16]) == class_gray_level(kNegClass, 2));
    CHECK(static_cast<unsigned char>(p.pixels[row * 16 + 15]) == class_gray_level(kPosClass, 2));
  }
}

TEST_CASE("SVG has one group per component") {
  const Network net = build_example_net(ExampleId::example1);
  const LabeledGrid grid = analyze_grid(net, Box::cube(2, -1, 1), 64, 1);
  const std::string svg = render_svg(grid);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  const std::regex group("<g id=\"component-(\\d+)\"");
  std::set<int> ids;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), group); it != std::sregex_iterator(); ++it)
    ids.insert(std::stoi((*it)[1]));
  CHECK(ids.size() == grid.components.size());
  CHECK(ids.size() == 3);
}

TEST_CASE("render_2d picks the format from the extension") {
  const auto dir = std::filesystem::temp_directory_path() / "narrownet_render_test";
  std::filesystem::create_directories(dir);
  const LabeledGrid grid = analyze_grid(build_example_net(ExampleId::example1), Box::cube(2, -1, 1), 32, 1);
  render_2d(grid, dir / "a.pgm");
  render_2d(grid, dir / "a.svg");
  std::ifstream pgm(dir / "a.pgm", std::ios::binary);
  std::string head(2, '\0');
  pgm.read(head.data(), 2);
  CHECK(head == "P5");
  CHECK(std::filesystem::file_size(dir / "a.svg") > 0);
  CHECK_THROWS_AS(render_2d(grid, dir / "a.png"), InputError);

  const LabeledGrid cube = analyze_grid(Network(Activation::relu(), {}, Layer{Matrix{{1, 0, 0}}, Vector{0.0}}),
                                        Box::cube(3, -1, 1), 4, 1);
  CHECK_THROWS_AS(render_pgm(cube), UnsupportedError);
  std::filesystem::remove_all(dir);
}
