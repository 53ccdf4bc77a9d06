#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "narrownet/error.hpp"
#include "narrownet/regions.hpp"
#include "narrownet/sphere.hpp"
#include "support/random_nets.hpp"

using namespace narrownet;

namespace {

Dataset random_batch(Rng& rng, std::size_t d, std::size_t n) {
  Dataset b;
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    b.x.push_back(testsupport::uniform_point(rng, d, -1, 1));
    b.y.push_back(coin(rng) ? 1 : 0);
  }
  return b;
}

// Two Gaussian blobs at (-2,0) and (2,0).
SphereDataset blobs(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  SphereDataset data;
  for (Dataset* part : {&data.train, &data.test})
    for (int i = 0; i < 400; ++i) {
      const int label = i % 2;
      part->x.push_back(Vector{(label ? 2.0 : -2.0) + g(rng), g(rng)});
      part->y.push_back(label);
    }
  return data;
}

// Largest hidden preactivation distance to the kink, over a batch.
double min_kink_distance(const Network& net, const Dataset& b) {
  double m = INFINITY;
  for (const auto& x : b.x)
    for (const auto& z : net.forward_trace(x).preactivations)
      for (double zi : z) m = std::min(m, std::abs(zi));
  return m;
}

}  // namespace

TEST_CASE("sphere sampling") {
  Rng rng(1);
  for (const Vector& p : sample_sphere(2, 1.0, 10000, rng)) CHECK(std::abs(norm2(p) - 1.0) <= 1e-12);
  for (const Vector& p : sample_sphere(5, 2.5, 1000, rng)) CHECK(std::abs(norm2(p) - 2.5) <= 1e-12);
  CHECK_THROWS_AS(sample_sphere(1, 1.0, 10, rng), InputError);
  CHECK_THROWS_AS(sample_sphere(2, 0.0, 10, rng), InputError);

  const auto d2 = SphereDatasetConfig::defaults(2), d3 = SphereDatasetConfig::defaults(3);
  CHECK(d2.r_inner == 0.5);
  CHECK(d2.r_outer == 1.0);
  CHECK(d3.r_inner == 1.0);
  CHECK(d3.r_outer == 2.0);

  // Sample mean within five standard errors of the origin.
  const std::size_t n = 100000;
  const double r = 2.0;
  const auto pts = sample_sphere(3, r, n, rng);
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (const auto& p : pts) mean += p[k];
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean) <= 5.0 * r / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("sphere dataset") {
  SphereDatasetConfig cfg = SphereDatasetConfig::defaults(2);
  cfg.n_train_per_class = 50;
  cfg.n_test_per_class = 20;
  cfg.seed = 7;
  const SphereDataset data = make_sphere_dataset(cfg);
  CHECK(data.train.size() == 100);
  CHECK(data.test.size() == 40);
  for (std::size_t i = 0; i < data.train.size(); ++i)
    CHECK(norm2(data.train.x[i]) == doctest::Approx(data.train.y[i] == 0 ? 0.5 : 1.0));
  CHECK(make_sphere_dataset(cfg).train.x == data.train.x);

  const std::string csv = dataset_to_csv(data.test);
  CHECK(csv.rfind("x1,x2,label\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);

  cfg.r_outer = 0.4;
  CHECK_THROWS_AS(make_sphere_dataset(cfg), InputError);
}

TEST_CASE("init_mlp") {
  const Network a = init_mlp({2, 3, 2}, Activation::relu(), 11);
  CHECK(a.hidden()[0].weights.rows() == 3);
  CHECK(a.hidden()[0].weights.cols() == 2);
  CHECK(a.output().weights.rows() == 2);
  CHECK(a.output().weights.cols() == 3);
  CHECK(a == init_mlp({2, 3, 2}, Activation::relu(), 11));
  CHECK_FALSE(a == init_mlp({2, 3, 2}, Activation::relu(), 12));
  for (double b : a.hidden()[0].bias) CHECK(b == 0.0);

  // 10^4 weights: empirical variance within 10% of 2/fan_in.
  const Network big = init_mlp({50, 200, 2}, Activation::relu(), 3);
  const Matrix& w = big.hidden()[0].weights;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) {
      sum += w(i, j);
      sq += w(i, j) * w(i, j);
    }
  const double n = static_cast<double>(w.rows() * w.cols());
  const double var = sq / n - (sum / n) * (sum / n);
  CHECK(std::abs(var - 2.0 / 50.0) <= 0.1 * 2.0 / 50.0);
}

TEST_CASE("grad_check on random tanh nets") {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const Network net = init_mlp({3, 3, 3, 2}, Activation::tanh(), 100 + t);
    CHECK(grad_check(net, random_batch(rng, 3, 16), 1e-6) < 1e-6);
  }
}

TEST_CASE("grad_check on random relu nets away from kinks") {
  Rng rng(22);
  const double h = 1e-6;
  int checked = 0;
  for (int t = 0; t < 200 && checked < 20; ++t) {
    const Network net = testsupport::from_widths(rng, Activation::relu(), {3, 3, 2, 2});
    const Dataset batch = random_batch(rng, 3, 8);
    if (min_kink_distance(net, batch) < 10 * h) {
      CHECK_THROWS_AS(grad_check(net, batch, h), PreconditionError);
      continue;
    }
    CHECK(grad_check(net, batch, h) < 1e-5);
    ++checked;
  }
  CHECK(checked == 20);

  // A point right at a kink is rejected.
  const Network kink(Activation::relu(), {Layer{Matrix::identity(2), Vector{0, 0}}},
                     Layer{Matrix{{1, 0}, {0, 1}}, Vector{0, 0}});
  Dataset at_kink;
  at_kink.x = {Vector{0.0, 0.5}};
  at_kink.y = {0};
  CHECK_THROWS_AS(grad_check(kink, at_kink, 1e-6), PreconditionError);
  CHECK_THROWS_AS(grad_check(kink, at_kink, 0.0), InputError);
}

TEST_CASE("grad_check on a saturated zero-loss batch") {
  // Logit gap of about 200 on every point: softmax is saturated.
  const Network net(Activation::tanh(), {Layer{Matrix{{1, 0}, {0, 1}}, Vector{0, 0}}},
                    Layer{Matrix{{-200, 0}, {200, 0}}, Vector{0, 0}});
  Dataset b;
  b.x = {Vector{3, 0.1}, Vector{4, -0.2}, Vector{-3, 0.3}, Vector{-5, 0.0}};
  b.y = {1, 1, 0, 0};
  CHECK(softmax_cross_entropy(net, b) < 1e-50);
  CHECK(grad_check(net, b, 1e-6) < 1e-8);
}

TEST_CASE("training reaches 100% on separable blobs") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const SphereDataset data = blobs(seed);
    TrainConfig cfg;
    cfg.layer_widths = {2, 4, 2};
    cfg.batch_size = 32;
    cfg.epochs = 5;
    cfg.learning_rate = 1e-2;
    cfg.seed = seed;
    const TrainResult r = train(init_mlp(cfg.layer_widths, cfg.activation, seed), data, cfg);
    CHECK(r.record.reached_100);
    CHECK(r.record.max_test_accuracy == 1.0);
    CHECK(r.record.epochs_run <= 5);
    CHECK(accuracy(r.net, data.test) == 1.0);
  }
}

TEST_CASE("training is deterministic") {
  SphereDatasetConfig dc = SphereDatasetConfig::defaults(2);
  dc.n_train_per_class = 200;
  dc.n_test_per_class = 50;
  const SphereDataset data = make_sphere_dataset(dc);
  TrainConfig cfg;
  cfg.layer_widths = {2, 3, 2};
  cfg.batch_size = 32;
  cfg.epochs = 3;
  cfg.seed = 5;
  const TrainResult a = train(init_mlp(cfg.layer_widths, cfg.activation, 5), data, cfg, dc);
  const TrainResult b = train(init_mlp(cfg.layer_widths, cfg.activation, 5), data, cfg, dc);
  CHECK(a.net == b.net);
  CHECK(a.record.max_test_accuracy == b.record.max_test_accuracy);
  CHECK(run_record_to_json(a.record)["head"] == "softmax2");

  cfg.batch_size = 10000;
  CHECK_THROWS_AS(train(a.net, data, cfg), InputError);
}

TEST_CASE("sweep cardinality and scheduling independence") {
  SweepConfig cfg;
  cfg.dims = {2};
  cfg.depths = {1};
  cfg.repeats = 10;
  cfg.n_train_per_class = 100;
  cfg.n_test_per_class = 30;
  cfg.epochs = 2;
  cfg.threads = 1;
  const SweepResult one = sweep(cfg);
  CHECK(one.records.size() == 20);
  REQUIRE(one.settings.size() == 2);
  CHECK(one.settings[0].width == 2);
  CHECK(one.settings[1].width == 3);
  for (std::size_t i = 0; i < one.records.size(); ++i) CHECK(one.records[i].train.seed == i);
  const std::string csv = sweep_csv(one, false);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
  CHECK(csv.rfind("d_in,depth,width,repeat,seed,max_test_acc,reached_100,epochs_run,wall_time_s\n", 0) == 0);

  cfg.threads = 4;
  CHECK(sweep_csv(sweep(cfg), false) == csv);
  CHECK(sweep_aggregate_json(one).size() == 2);
}

TEST_CASE("failed width-d_in nets leave the inner class unbounded") {
  SphereDatasetConfig dc = SphereDatasetConfig::defaults(2);
  dc.n_train_per_class = 1000;
  dc.n_test_per_class = 300;
  const SphereDataset data = make_sphere_dataset(dc);
  int failed = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TrainConfig cfg;
    cfg.layer_widths = {2, 2, 2};
    cfg.batch_size = 32;
    cfg.epochs = 10;
    cfg.seed = seed;
    const TrainResult r = train(init_mlp(cfg.layer_widths, cfg.activation, seed), data, cfg, dc);
    CHECK_FALSE(r.record.reached_100);
    if (r.record.reached_100) continue;
    ++failed;
    const LabeledGrid grid = analyze_grid(r.net, Box::cube(2, -1, 1), 128, 1);
    for (const auto& c : grid.components_of_class(0)) CHECK(c.touches_boundary);
  }
  CHECK(failed == 3);
}
