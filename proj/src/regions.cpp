#include "narrownet/regions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "narrownet/parallel.hpp"
#include "narrownet/witness.hpp"

namespace narrownet {

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller root wins; keeps roots at the lexicographically first cell.
    if (a < b)
      parent_[b] = a;
    else
      parent_[a] = b;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

// Smallest cell edge.
double cell_size(const LabeledGrid& grid) {
  double h = INFINITY;
  for (std::size_t a = 0; a < grid.dim(); ++a)
    h = std::min(h, (grid.box.hi[a] - grid.box.lo[a]) / static_cast<double>(grid.resolution));
  return h;
}

}  // namespace

std::vector<std::size_t> LabeledGrid::cell_coords(std::size_t flat) const {
  std::vector<std::size_t> c(dim());
  for (std::size_t a = dim(); a-- > 0;) {
    c[a] = flat % resolution;
    flat /= resolution;
  }
  return c;
}

Vector LabeledGrid::cell_center(std::size_t flat) const {
  const auto c = cell_coords(flat);
  Vector p(dim());
  for (std::size_t a = 0; a < dim(); ++a) {
    const double h = (box.hi[a] - box.lo[a]) / static_cast<double>(resolution);
    p[a] = box.lo[a] + (static_cast<double>(c[a]) + 0.5) * h;
  }
  return p;
}

bool LabeledGrid::on_boundary(std::size_t flat) const {
  for (std::size_t a = 0; a < dim(); ++a) {
    const std::size_t i = flat % resolution;
    if (i == 0 || i + 1 == resolution) return true;
    flat /= resolution;
  }
  return false;
}

std::vector<ComponentInfo> LabeledGrid::components_of_class(int cls) const {
  std::vector<ComponentInfo> out;
  for (const auto& c : components)
    if (c.cls == cls) out.push_back(c);
  return out;
}

LabeledGrid classify_grid(const Network& net, const Box& box, std::size_t resolution, std::size_t threads) {
  if (resolution < 2) throw InputError("classify_grid: resolution must be at least 2");
  if (box.dim() != net.d_in()) throw InputError("classify_grid: box dimension differs from d_in");
  if (box.dim() > 4) throw UnsupportedError("classify_grid: at most 4 input dimensions are supported");
  LabeledGrid grid;
  grid.box = box;
  grid.resolution = resolution;
  const std::size_t n = ipow(resolution, box.dim());
  grid.cell_class.assign(n, -1);
  grid.cell_component.assign(n, -1);

  const std::size_t d = box.dim();
  Vector step(d);
  for (std::size_t a = 0; a < d; ++a) step[a] = (box.hi[a] - box.lo[a]) / static_cast<double>(resolution);

  parallel_for(n, resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    Evaluator eval(net);
    Vector p(d);
    for (std::size_t flat = begin; flat < end; ++flat) {
      std::size_t rest = flat;
      for (std::size_t a = d; a-- > 0;) {
        p[a] = box.lo[a] + (static_cast<double>(rest % resolution) + 0.5) * step[a];
        rest /= resolution;
      }
      grid.cell_class[flat] = eval.decide(p);
    }
  });
  return grid;
}

LabeledGrid label_components(LabeledGrid grid) {
  const std::size_t n = grid.num_cells();
  const std::size_t d = grid.dim();
  const std::size_t res = grid.resolution;
  UnionFind uf(n);
  for (std::size_t flat = 0; flat < n; ++flat) {
    const int cls = grid.cell_class[flat];
    if (cls < 0) continue;
    std::size_t stride = 1;
    std::size_t rest = flat;
    for (std::size_t a = d; a-- > 0;) {
      const std::size_t i = rest % res;
      rest /= res;
      if (i + 1 < res && grid.cell_class[flat + stride] == cls) uf.unite(flat, flat + stride);
      stride *= res;
    }
  }

  grid.components.clear();
  std::vector<int> root_id(n, -1);
  for (std::size_t flat = 0; flat < n; ++flat) {
    const int cls = grid.cell_class[flat];
    if (cls < 0) {
      grid.cell_component[flat] = -1;
      continue;
    }
    const std::size_t root = uf.find(flat);
    if (root_id[root] < 0) {
      root_id[root] = static_cast<int>(grid.components.size());
      grid.components.push_back({root_id[root], cls, 0, false, flat});
    }
    const int id = root_id[root];
    grid.cell_component[flat] = id;
    auto& comp = grid.components[static_cast<std::size_t>(id)];
    ++comp.cell_count;
    if (!comp.touches_boundary && grid.on_boundary(flat)) comp.touches_boundary = true;
  }
  return grid;
}

LabeledGrid analyze_grid(const Network& net, const Box& box, std::size_t resolution, std::size_t threads) {
  return label_components(classify_grid(net, box, resolution, threads));
}

Json component_report(const Network& net, const LabeledGrid& grid) {
  Json classes = Json::object();
  for (std::size_t c = 0; c < net.num_classes(); ++c) {
    Json comps = Json::array();
    for (const auto& info : grid.components_of_class(static_cast<int>(c)))
      comps.push_back({{"cells", info.cell_count},
                       {"touches_boundary", info.touches_boundary},
                       {"seed_point", grid.cell_center(info.seed_cell)}});
    classes[net.class_name(static_cast<int>(c))] = {{"components", comps}};
  }
  std::size_t ties = 0;
  for (int c : grid.cell_class) ties += c < 0 ? 1 : 0;
  return {{"box", {{"lo", grid.box.lo}, {"hi", grid.box.hi}}},
          {"resolution", grid.resolution},
          {"tie_cells", ties},
          {"classes", classes}};
}

ExampleId parse_example_id(const std::string& id) {
  if (id == "1") return ExampleId::example1;
  if (id == "2-literal") return ExampleId::example2_literal;
  if (id == "2-corrected") return ExampleId::example2_corrected;
  throw InputError("unknown example id '" + id + "' (expected 1, 2-literal or 2-corrected)");
}

std::string to_string(ExampleId id) {
  switch (id) {
    case ExampleId::example1: return "1";
    case ExampleId::example2_literal: return "2-literal";
    case ExampleId::example2_corrected: return "2-corrected";
  }
  return "?";
}

Network build_example_net(ExampleId id) {
  const double r2 = std::sqrt(2.0);
  const double h = r2 / 2.0;  // cos(π/4) = sin(π/4) = 1/√2
  // Output row (1, -4)/√2 shared by both examples.
  const Layer head{Matrix{{h, -4.0 * h}}, Vector{-0.25}};
  if (id == ExampleId::example1) {
    // Rotation by -π/4, bias √2·(1, -1/2).
    Layer first{Matrix{{h, h}, {-h, h}}, Vector{r2, -h}};
    return Network(Activation::relu(), {std::move(first)}, head);
  }
  // Identity first layer, then rotation by -3π/4 with bias √2·(1, 1/2).
  Layer first{Matrix::identity(2), Vector{0.0, 0.0}};
  Layer second{Matrix{{-h, h}, {-h, -h}}, Vector{r2, h}};
  Layer out = head;
  out.bias[0] = id == ExampleId::example2_literal ? 0.25 : -0.25;
  return Network(Activation::relu(), {std::move(first), std::move(second)}, std::move(out));
}

std::vector<BoundaryTouchResult> boundary_touch_suite(std::span<const Network> nets, const Box& box,
                                                      std::size_t resolution, std::size_t threads) {
  std::vector<BoundaryTouchResult> results;
  results.reserve(nets.size());
  for (const Network& net : nets) {
    BoundaryTouchResult r;
    r.narrow = net.width() <= net.d_in();
    for (std::size_t res = resolution;; res *= 2) {
      const LabeledGrid grid = analyze_grid(net, box, res, threads);
      r.resolution_used = res;
      r.components = grid.components.size();
      r.violations.clear();
      for (const auto& c : grid.components)
        if (!c.touches_boundary)
          r.violations.push_back({c.cls, c.cell_count, c.seed_cell, grid.cell_center(c.seed_cell)});
      if (r.violations.empty()) break;
      if (r.escalated) {
        const double spacing = cell_size(grid) / 2;
        std::erase_if(r.violations, [&](const BoundaryViolation& v) {
          const bool escapes = escape_witness(net, v.seed_point, box, spacing);
          r.witnessed += escapes ? 1 : 0;
          return escapes;
        });
        break;
      }
      r.escalated = true;
    }
    results.push_back(std::move(r));
  }
  return results;
}

ConnectivityReport connectivity_report(const Network& net, const Box& box, std::size_t resolution,
                                       std::size_t threads) {
  const Activation& act = net.activation();
  if (!act.strictly_increasing()) throw PreconditionError("activation is not strictly increasing");
  if (!act.surjective()) throw PreconditionError("activation is not surjective onto R");
  std::size_t prev = net.d_in();
  std::vector<const Layer*> layers;
  for (const auto& l : net.hidden()) layers.push_back(&l);
  layers.push_back(&net.output());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::size_t w = layers[i]->out_dim();
    if (i == 0 ? w != prev : w > prev)
      throw PreconditionError("layer widths must satisfy d_in = d_1 >= d_2 >= ... >= d_out (layer " +
                              std::to_string(i) + ")");
    if (rank(layers[i]->weights) < std::min(layers[i]->weights.rows(), layers[i]->weights.cols()))
      throw PreconditionError("weight matrix of layer " + std::to_string(i) + " is rank deficient");
    prev = w;
  }
  const LabeledGrid grid = analyze_grid(net, box, resolution, threads);
  ConnectivityReport report;
  report.grid_components.assign(net.num_classes(), 0);
  report.joined.assign(net.num_classes(), 0);
  report.connected = true;
  const double spacing = cell_size(grid) / 2;
  for (std::size_t cls = 0; cls < net.num_classes(); ++cls) {
    const auto comps = grid.components_of_class(static_cast<int>(cls));
    report.grid_components[cls] = comps.size();
    if (comps.size() < 2) continue;
    const Vector anchor = grid.cell_center(comps.front().seed_cell);
    for (std::size_t c = 1; c < comps.size(); ++c) {
      if (connecting_witness(net, anchor, grid.cell_center(comps[c].seed_cell), spacing))
        ++report.joined[cls];
      else
        report.connected = false;
    }
  }
  return report;
}

bool connectivity_check_monotonic(const Network& net, const Box& box, std::size_t resolution, std::size_t threads) {
  return connectivity_report(net, box, resolution, threads).connected;
}

}  // namespace narrownet
