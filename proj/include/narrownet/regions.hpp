#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "narrownet/fixture_io.hpp"
#include "narrownet/invertible.hpp"
#include "narrownet/network.hpp"

namespace narrownet {

struct ComponentInfo {
  int id = 0;
  int cls = 0;
  std::size_t cell_count = 0;
  bool touches_boundary = false;
  std::size_t seed_cell = 0;  // lexicographically smallest member (flat index)
};

// Uniform grid of res^d cells over a box. Flat cell index is row-major with
// axis 0 most significant, so flat order is lexicographic order.
struct LabeledGrid {
  Box box;
  std::size_t resolution = 0;
  std::vector<int> cell_class;      // -1: tie at the cell center
  std::vector<int> cell_component;  // -1: unlabeled (tie cell or not yet labeled)
  std::vector<ComponentInfo> components;

  std::size_t dim() const noexcept { return box.dim(); }
  std::size_t num_cells() const noexcept { return cell_class.size(); }
  std::vector<std::size_t> cell_coords(std::size_t flat) const;
  Vector cell_center(std::size_t flat) const;
  bool on_boundary(std::size_t flat) const;

  std::vector<ComponentInfo> components_of_class(int cls) const;
};

// Labels every cell by decide() at its center. Supports d <= 4.
LabeledGrid classify_grid(const Network& net, const Box& box, std::size_t resolution, std::size_t threads = 0);

// Union-find over face-adjacent cells of equal class. Component ids are
// assigned in flat order of each component's first cell, so they do not
// depend on traversal order or worker count.
LabeledGrid label_components(LabeledGrid grid);

LabeledGrid analyze_grid(const Network& net, const Box& box, std::size_t resolution, std::size_t threads = 0);

// {"box":…, "resolution":…, "classes":{"neg":{"components":[{"cells":N,"touches_boundary":true},…]},…}}
Json component_report(const Network& net, const LabeledGrid& grid);

// Two counterexample networks. Example 2 ships with the printed output bias
// (+1/4, "literal") and with its sign flipped (-1/4, "corrected").
enum class ExampleId { example1, example2_literal, example2_corrected };
ExampleId parse_example_id(const std::string& id);  // "1", "2-literal", "2-corrected"
std::string to_string(ExampleId id);
Network build_example_net(ExampleId id);

struct BoundaryViolation {
  int cls = 0;
  std::size_t cell_count = 0;
  std::size_t seed_cell = 0;
  Vector seed_point;
};

struct BoundaryTouchResult {
  bool narrow = true;  // width <= d_in; only then are violations unexpected
  std::size_t resolution_used = 0;
  bool escalated = false;
  std::size_t components = 0;
  std::vector<BoundaryViolation> violations;  // components never reaching the box boundary
  std::size_t witnessed = 0;  // grid violations cleared by an escape path from their seed point
};

// For each net: label the grid and flag components that do not touch the
// outer cell layer. Wide nets are accepted so the check can be run as a
// negative control. A net with violations is re-run once at twice the
// resolution. A violation surviving that is dropped only if escape_witness
// finds a verified path from its seed point to the box boundary, so grid
// components split off from a region thinner than a cell are not reported.
std::vector<BoundaryTouchResult> boundary_touch_suite(std::span<const Network> nets, const Box& box,
                                                      std::size_t resolution, std::size_t threads = 0);

struct ConnectivityReport {
  std::vector<std::size_t> grid_components;  // per class
  std::vector<std::size_t> joined;           // per class, components joined to the first by a witness path
  bool connected = false;                    // every class forms one piece
};

// Requires d_in = d_1 >= d_2 >= … >= d_out, full-rank weights and a
// strictly increasing surjective activation. Grid components of one class
// count as one piece when connecting_witness joins their seed points; the
// region may leave the box and re-enter, or narrow below the cell size.
ConnectivityReport connectivity_report(const Network& net, const Box& box, std::size_t resolution,
                                       std::size_t threads = 0);
bool connectivity_check_monotonic(const Network& net, const Box& box, std::size_t resolution,
                                  std::size_t threads = 0);

}  // namespace narrownet
