#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "narrownet/linalg.hpp"

namespace narrownet {

enum class ActivationKind { relu, leaky_relu, tanh };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double beta = 0.0;  // leaky slope, meaningful only for leaky_relu

  static Activation relu() { return {ActivationKind::relu, 0.0}; }
  static Activation leaky_relu(double beta);
  static Activation tanh() { return {ActivationKind::tanh, 0.0}; }

  double operator()(double t) const noexcept {
    switch (kind) {
      case ActivationKind::relu: return t > 0.0 ? t : 0.0;
      case ActivationKind::leaky_relu: return t > 0.0 ? t : beta * t;
      case ActivationKind::tanh: return std::tanh(t);
    }
    return t;
  }
  double derivative(double t) const noexcept;

  bool piecewise_linear() const noexcept { return kind != ActivationKind::tanh; }
  bool strictly_increasing() const noexcept { return kind != ActivationKind::relu; }
  bool surjective() const noexcept { return kind == ActivationKind::leaky_relu; }
  double lipschitz() const noexcept { return 1.0; }

  friend bool operator==(const Activation&, const Activation&) = default;
};

std::string to_string(ActivationKind kind);
ActivationKind activation_kind_from_string(const std::string& name);  // throws InputError

struct Layer {
  Matrix weights;  // out × in
  Vector bias;     // out

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct TraceRecord {
  std::vector<Vector> preactivations;  // one per hidden layer
  std::vector<Vector> activations;     // sigma(preactivation), hidden layers only
  Vector output;
};

// Class labels are indices. With d_out >= 2 they are output components;
// with d_out == 1 the sign convention applies: 0 = "neg" (F < 0), 1 = "pos".
inline constexpr int kNegClass = 0;
inline constexpr int kPosClass = 1;

// F = W_L ∘ A_{L-1} ∘ … ∘ A_1 with A_j(x) = σ(W_j x + b_j); the output
// layer is affine. Immutable once constructed.
class Network {
 public:
  Network(Activation activation, std::vector<Layer> hidden, Layer output);

  const Activation& activation() const noexcept { return activation_; }
  const std::vector<Layer>& hidden() const noexcept { return hidden_; }
  const Layer& output() const noexcept { return output_; }

  std::size_t d_in() const noexcept;
  std::size_t d_out() const noexcept { return output_.out_dim(); }
  std::size_t depth() const noexcept { return hidden_.size() + 1; }
  // max_j d_j over hidden and output layers.
  std::size_t width() const noexcept;

  bool scalar_output() const noexcept { return d_out() == 1; }
  std::size_t num_classes() const noexcept { return scalar_output() ? 2 : d_out(); }
  std::string class_name(int cls) const;
  int class_from_name(const std::string& name) const;  // throws InputError

  Vector forward(std::span<const double> x) const;
  TraceRecord forward_trace(std::span<const double> x) const;
  std::optional<int> decide(std::span<const double> x) const;

  // Output of the last hidden layer (x itself when there are none).
  Vector hidden_output(std::span<const double> x) const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  Activation activation_;
  std::vector<Layer> hidden_;
  Layer output_;
};

// Class decision from a raw output vector; nullopt on exact ties.
std::optional<int> decide_output(std::span<const double> output);

// Score of class `cls` (the component F_j, or ±F in the scalar case).
double class_score(std::span<const double> output, int cls);

// Reusable scratch buffers for hot loops (grid classification, training
// evaluation). One per thread.
class Evaluator {
 public:
  explicit Evaluator(const Network& net);
  std::span<const double> forward(std::span<const double> x);
  int decide(std::span<const double> x);  // -1 on ties

 private:
  const Network* net_;
  Vector a_, b_;
};

std::size_t width(const Network& net);
Vector forward(const Network& net, std::span<const double> x);
TraceRecord forward_trace(const Network& net, std::span<const double> x);
std::optional<int> decide(const Network& net, std::span<const double> x);

// Orthonormal basis of the numerical nullspace of the first weight matrix.
std::vector<Vector> kernel_directions(const Network& net, double tol = 1e-10);

}  // namespace narrownet
