#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "narrownet/error.hpp"
#include "narrownet/fixture_io.hpp"
#include "narrownet/linalg.hpp"
#include "narrownet/network.hpp"

namespace narrownet {

// Axis-aligned box [lo_1, hi_1] × … × [lo_d, hi_d].
struct Box {
  Vector lo, hi;

  Box() = default;
  Box(Vector lo, Vector hi);
  static Box cube(std::size_t dim, double lo, double hi);

  std::size_t dim() const noexcept { return lo.size(); }
};

// All 2^d corners followed by `count` Halton points mapped into the box.
std::vector<Vector> box_samples(const Box& box, std::size_t count);

struct PerturbationReport {
  Vector per_layer_budget;       // δ_l actually used in the final attempt
  Vector per_layer_op_distance;  // ||W̃_l - W_l||_op
  Vector min_singular_values;    // of each W̃_l
  double measured_sup_error = 0.0;
  std::size_t sample_count = 0;
  double target_eps = 0.0;
  int retries = 0;               // budget halvings performed
};

Json report_to_json(const PerturbationReport& r);

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, PerturbationReport report)
      : Error(what), report_(std::move(report)) {}
  const PerturbationReport& report() const noexcept { return report_; }

 private:
  PerturbationReport report_;
};

// W + tI for the first t in delta/2, delta/4, … that is numerically
// invertible; W itself when it already is.
Matrix perturb_invertible(const Matrix& w, double delta);

// Pads every hidden layer to d_in × d_in with zero rows, zero biases and
// zero columns in the consuming layer. Outputs are unchanged bit-for-bit.
Network pad_square(const Network& net);

struct InvertibilizeResult {
  Network net;
  PerturbationReport report;
};

// Replaces the (padded) hidden weight matrices by nearby invertible ones so
// that the sampled sup error on `box` stays below eps. The output layer is
// not touched.
InvertibilizeResult invertibilize_network(const Network& net, const Box& box, double eps,
                                          std::size_t sample_budget = 10000, std::size_t threads = 1);

// Lowers the score of class `cls` by eps/2 everywhere (for scalar output,
// F moves toward the other class).
Network shift_output_bias(const Network& net, int cls, double eps);

}  // namespace narrownet
