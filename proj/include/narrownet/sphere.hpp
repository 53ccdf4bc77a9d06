#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "narrownet/fixture_io.hpp"
#include "narrownet/network.hpp"

namespace narrownet {

using Rng = std::mt19937_64;

// Two concentric spheres centred at the origin: label 0 on the inner one,
// label 1 on the outer one.
struct SphereDatasetConfig {
  std::size_t d_in = 2;
  double r_inner = 0.5;
  double r_outer = 1.0;
  std::size_t n_train_per_class = 10000;
  std::size_t n_test_per_class = 2000;
  std::uint64_t seed = 0;

  // Radii (d_in - 1)/2 and d_in - 1: 0.5/1.0 in 2-D, 1.0/2.0 in 3-D.
  static SphereDatasetConfig defaults(std::size_t d_in);
};

struct Dataset {
  std::vector<Vector> x;
  std::vector<int> y;
  std::size_t size() const noexcept { return x.size(); }
};

struct SphereDataset {
  Dataset train;
  Dataset test;
};

// n points r·g/||g|| with g standard normal.
std::vector<Vector> sample_sphere(std::size_t d, double r, std::size_t n, Rng& rng);
SphereDataset make_sphere_dataset(const SphereDatasetConfig& cfg);
std::string dataset_to_csv(const Dataset& data);  // header x1..xd,label

// widths = {d_in, hidden..., d_out}. He-normal weights, zero biases.
Network init_mlp(const std::vector<std::size_t>& widths, Activation activation, std::uint64_t seed);

struct Gradients {
  std::vector<Matrix> weights;  // hidden layers, then output layer
  std::vector<Vector> biases;
};

// Mean softmax cross-entropy over the batch and its gradient by backprop.
double softmax_cross_entropy(const Network& net, const Dataset& batch, Gradients* grads = nullptr);

// Largest mixed error |g_bp - g_fd| / max(1, |g_bp|, |g_fd|) over all
// parameters, with g_fd from central differences of step h. For relu and
// leaky_relu every hidden preactivation must be at least 10h from the kink.
double grad_check(const Network& net, const Dataset& batch, double h);

double accuracy(const Network& net, const Dataset& data);

struct TrainConfig {
  std::vector<std::size_t> layer_widths;  // d_in, hidden..., d_out
  Activation activation = Activation::relu();
  double learning_rate = 1e-3;
  std::size_t batch_size = 10000;
  std::size_t epochs = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

struct RunRecord {
  SphereDatasetConfig data;
  TrainConfig train;
  double max_test_accuracy = 0.0;
  bool reached_100 = false;  // every test point classified correctly in some epoch
  std::size_t epochs_run = 0;
  double wall_time_s = 0.0;
  bool diverged = false;
  std::string head = "softmax2";
};

Json run_record_to_json(const RunRecord& r);

struct TrainResult {
  Network net;
  RunRecord record;
};

// Minibatch Adam on softmax cross-entropy; test accuracy after every epoch.
// Stops early once the test set is fully correct.
TrainResult train(Network net, const SphereDataset& data, const TrainConfig& cfg,
                  const SphereDatasetConfig& data_cfg = {});

struct SweepConfig {
  std::vector<std::size_t> dims{2, 3};
  std::vector<std::size_t> depths{1, 2};
  std::vector<int> width_offsets{0, 1};
  std::size_t repeats = 10;
  std::uint64_t base_seed = 0;
  std::size_t n_train_per_class = 10000;
  std::size_t n_test_per_class = 2000;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  Activation activation = Activation::relu();
  std::size_t threads = 1;
};

struct SettingSummary {
  std::size_t d_in = 0;
  std::size_t depth = 0;
  std::size_t width = 0;
  std::size_t runs = 0;
  std::size_t successes = 0;
  double best_accuracy = 0.0;
  double success_rate() const noexcept { return runs ? static_cast<double>(successes) / runs : 0.0; }
};

struct SweepResult {
  std::vector<RunRecord> records;  // in run-index order
  std::vector<std::size_t> repeat_index;
  std::vector<SettingSummary> settings;
};

// Run i (enumerating dims × depths × offsets × repeats in that nesting)
// uses seed base_seed ^ i, so results do not depend on scheduling.
SweepResult sweep(const SweepConfig& cfg);

// CSV: d_in,depth,width,repeat,seed,max_test_acc,reached_100,epochs_run,wall_time_s.
// With include_timing = false the timing column is written as 0.
std::string sweep_csv(const SweepResult& result, bool include_timing);
Json sweep_aggregate_json(const SweepResult& result);

}  // namespace narrownet
