#include "narrownet/sphere.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "narrownet/error.hpp"
#include "narrownet/parallel.hpp"

namespace narrownet {

namespace {

// All layers (hidden then output) as one list; the trainer mutates these.
std::vector<Layer> all_layers(const Network& net) {
  std::vector<Layer> layers = net.hidden();
  layers.push_back(net.output());
  return layers;
}

Network assemble(const Activation& act, std::vector<Layer> layers) {
  Layer out = std::move(layers.back());
  layers.pop_back();
  return Network(act, std::move(layers), std::move(out));
}

Gradients zero_gradients(const std::vector<Layer>& layers) {
  Gradients g;
  for (const auto& l : layers) {
    g.weights.emplace_back(l.weights.rows(), l.weights.cols());
    g.biases.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

// Per-sample forward/backward with reusable buffers.
class Backprop {
 public:
  Backprop(const Activation& act, const std::vector<Layer>& layers) : act_(act), layers_(&layers) {
    z_.resize(layers.size());
    a_.resize(layers.size() + 1);
    for (std::size_t l = 0; l < layers.size(); ++l) z_[l].resize(layers[l].out_dim());
    a_[0].resize(layers.front().in_dim());
    for (std::size_t l = 0; l < layers.size(); ++l) a_[l + 1].resize(layers[l].out_dim());
  }

  // Returns the sample loss; accumulates gradients (unscaled) when g != nullptr.
  double run(std::span<const double> x, int label, Gradients* g) {
    const auto& layers = *layers_;
    const std::size_t n = layers.size();
    std::copy(x.begin(), x.end(), a_[0].begin());
    for (std::size_t l = 0; l < n; ++l) {
      matvec_into(layers[l].weights, a_[l], z_[l]);
      for (std::size_t i = 0; i < z_[l].size(); ++i) {
        z_[l][i] += layers[l].bias[i];
        a_[l + 1][i] = l + 1 < n ? act_(z_[l][i]) : z_[l][i];
      }
    }
    // Stable softmax cross-entropy on the logits z_[n-1].
    const Vector& logits = z_[n - 1];
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double log_norm = mx + std::log(sum);
    const double loss = log_norm - logits[static_cast<std::size_t>(label)];
    if (!g) return loss;

    delta_.assign(logits.size(), 0.0);
    for (std::size_t k = 0; k < logits.size(); ++k) delta_[k] = std::exp(logits[k] - log_norm);
    delta_[static_cast<std::size_t>(label)] -= 1.0;
    for (std::size_t l = n; l-- > 0;) {
      Matrix& gw = g->weights[l];
      Vector& gb = g->biases[l];
      for (std::size_t i = 0; i < delta_.size(); ++i) {
        gb[i] += delta_[i];
        auto row = gw.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += delta_[i] * a_[l][j];
      }
      if (l == 0) break;
      next_.assign(layers[l].in_dim(), 0.0);
      for (std::size_t i = 0; i < delta_.size(); ++i) {
        const auto row = layers[l].weights.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) next_[j] += row[j] * delta_[i];
      }
      for (std::size_t j = 0; j < next_.size(); ++j) next_[j] *= act_.derivative(z_[l - 1][j]);
      delta_.swap(next_);
    }
    return loss;
  }

  const std::vector<Vector>& preactivations() const { return z_; }

 private:
  Activation act_;
  const std::vector<Layer>* layers_;
  std::vector<Vector> z_, a_;
  Vector delta_, next_;
};

double mean_loss(const Activation& act, const std::vector<Layer>& layers, const Dataset& batch, Gradients* g) {
  Backprop bp(act, layers);
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) total += bp.run(batch.x[s], batch.y[s], g);
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (g) {
    for (auto& w : g->weights) w = inv * w;
    for (auto& b : g->biases)
      for (double& v : b) v *= inv;
  }
  return total * inv;
}

void check_batch(const Network& net, const Dataset& batch) {
  if (batch.size() == 0) throw InputError("empty batch");
  if (net.d_out() < 2) throw InputError("softmax cross-entropy needs d_out >= 2");
  for (std::size_t s = 0; s < batch.size(); ++s) {
    if (batch.x[s].size() != net.d_in()) throw InputError("batch point has the wrong dimension");
    if (batch.y[s] < 0 || static_cast<std::size_t>(batch.y[s]) >= net.d_out())
      throw InputError("batch label out of range");
  }
}

}  // namespace

SphereDatasetConfig SphereDatasetConfig::defaults(std::size_t d_in) {
  SphereDatasetConfig c;
  c.d_in = d_in;
  c.r_inner = (static_cast<double>(d_in) - 1.0) / 2.0;
  c.r_outer = static_cast<double>(d_in) - 1.0;
  return c;
}

std::vector<Vector> sample_sphere(std::size_t d, double r, std::size_t n, Rng& rng) {
  if (d < 2 || !(r > 0.0) || n == 0) throw InputError("sample_sphere needs d >= 2, r > 0, n >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> pts;
  pts.reserve(n);
  while (pts.size() < n) {
    Vector g(d);
    for (double& v : g) v = normal(rng);
    const double len = norm2(g);
    if (!(len > 1e-12)) continue;
    for (double& v : g) v *= r / len;
    pts.push_back(std::move(g));
  }
  return pts;
}

SphereDataset make_sphere_dataset(const SphereDatasetConfig& cfg) {
  if (!(cfg.r_inner > 0.0 && cfg.r_inner < cfg.r_outer)) throw InputError("sphere radii must satisfy 0 < inner < outer");
  Rng rng(cfg.seed);
  SphereDataset ds;
  auto fill = [&](Dataset& out, std::size_t n) {
    for (int label = 0; label < 2; ++label) {
      auto pts = sample_sphere(cfg.d_in, label == 0 ? cfg.r_inner : cfg.r_outer, n, rng);
      for (auto& p : pts) {
        out.x.push_back(std::move(p));
        out.y.push_back(label);
      }
    }
  };
  fill(ds.train, cfg.n_train_per_class);
  fill(ds.test, cfg.n_test_per_class);
  return ds;
}

std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream out;
  out << std::setprecision(17);
  const std::size_t d = data.size() ? data.x.front().size() : 0;
  for (std::size_t i = 0; i < d; ++i) out << "x" << (i + 1) << ",";
  out << "label\n";
  for (std::size_t s = 0; s < data.size(); ++s) {
    for (double v : data.x[s]) out << v << ",";
    out << data.y[s] << "\n";
  }
  return out.str();
}

Network init_mlp(const std::vector<std::size_t>& widths, Activation activation, std::uint64_t seed) {
  if (widths.size() < 2) throw InputError("init_mlp needs at least input and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw InputError("init_mlp: layer widths must be positive");
  Rng rng(seed);
  std::vector<Layer> layers;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const std::size_t fan_in = widths[l - 1];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Layer layer{Matrix(widths[l], fan_in), Vector(widths[l], 0.0)};
    for (std::size_t i = 0; i < widths[l]; ++i)
      for (std::size_t j = 0; j < fan_in; ++j) layer.weights(i, j) = normal(rng);
    layers.push_back(std::move(layer));
  }
  return assemble(activation, std::move(layers));
}

double softmax_cross_entropy(const Network& net, const Dataset& batch, Gradients* grads) {
  check_batch(net, batch);
  const auto layers = all_layers(net);
  if (grads) *grads = zero_gradients(layers);
  return mean_loss(net.activation(), layers, batch, grads);
}

double grad_check(const Network& net, const Dataset& batch, double h) {
  if (!(h > 0.0)) throw InputError("grad_check: h must be positive");
  check_batch(net, batch);
  auto layers = all_layers(net);
  if (net.activation().piecewise_linear()) {
    Backprop probe(net.activation(), layers);
    for (std::size_t s = 0; s < batch.size(); ++s) {
      probe.run(batch.x[s], batch.y[s], nullptr);
      const auto& z = probe.preactivations();
      for (std::size_t l = 0; l + 1 < z.size(); ++l)
        for (double v : z[l])
          if (std::abs(v) < 10.0 * h)
            throw PreconditionError("grad_check: batch point " + std::to_string(s) +
                                    " has a hidden preactivation within 10h of the kink");
    }
  }
  Gradients g = zero_gradients(layers);
  mean_loss(net.activation(), layers, batch, &g);

  double worst = 0.0;
  auto compare = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = mean_loss(net.activation(), layers, batch, nullptr);
    param = saved - h;
    const double down = mean_loss(net.activation(), layers, batch, nullptr);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
    worst = std::max(worst, err);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t i = 0; i < layers[l].weights.rows(); ++i)
      for (std::size_t j = 0; j < layers[l].weights.cols(); ++j) compare(layers[l].weights(i, j), g.weights[l](i, j));
    for (std::size_t i = 0; i < layers[l].bias.size(); ++i) compare(layers[l].bias[i], g.biases[l][i]);
  }
  return worst;
}

double accuracy(const Network& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  Evaluator eval(net);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < data.size(); ++s) correct += eval.decide(data.x[s]) == data.y[s] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

Json run_record_to_json(const RunRecord& r) {
  return {{"d_in", r.data.d_in},
          {"r_inner", r.data.r_inner},
          {"r_outer", r.data.r_outer},
          {"n_train_per_class", r.data.n_train_per_class},
          {"n_test_per_class", r.data.n_test_per_class},
          {"data_seed", r.data.seed},
          {"layer_widths", r.train.layer_widths},
          {"activation", to_string(r.train.activation.kind)},
          {"learning_rate", r.train.learning_rate},
          {"batch_size", r.train.batch_size},
          {"epochs", r.train.epochs},
          {"adam_beta1", r.train.adam_beta1},
          {"adam_beta2", r.train.adam_beta2},
          {"adam_eps", r.train.adam_eps},
          {"seed", r.train.seed},
          {"head", r.head},
          {"max_test_accuracy", r.max_test_accuracy},
          {"reached_100", r.reached_100},
          {"epochs_run", r.epochs_run},
          {"diverged", r.diverged},
          {"wall_time_s", r.wall_time_s}};
}

TrainResult train(Network net, const SphereDataset& data, const TrainConfig& cfg, const SphereDatasetConfig& data_cfg) {
  check_batch(net, data.train);
  if (!(cfg.learning_rate > 0.0)) throw InputError("train: learning rate must be positive");
  if (cfg.batch_size == 0 || cfg.batch_size > data.train.size())
    throw InputError("train: batch size must lie in [1, training-set size]");
  const auto start = std::chrono::steady_clock::now();

  RunRecord rec;
  rec.data = data_cfg;
  rec.train = cfg;
  std::vector<Layer> layers = all_layers(net);
  Gradients m = zero_gradients(layers), v = zero_gradients(layers);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  Dataset batch;

  for (std::size_t epoch = 0; epoch < cfg.epochs && !rec.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      batch.x.clear();
      batch.y.clear();
      for (std::size_t i = begin; i < end; ++i) {
        batch.x.push_back(data.train.x[order[i]]);
        batch.y.push_back(data.train.y[order[i]]);
      }
      Gradients g = zero_gradients(layers);
      const double loss = mean_loss(net.activation(), layers, batch, &g);
      if (!std::isfinite(loss)) {
        rec.diverged = true;
        break;
      }
      ++step;
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      auto update = [&](double& p, double grad, double& mm, double& vv) {
        mm = cfg.adam_beta1 * mm + (1.0 - cfg.adam_beta1) * grad;
        vv = cfg.adam_beta2 * vv + (1.0 - cfg.adam_beta2) * grad * grad;
        p -= cfg.learning_rate * (mm / c1) / (std::sqrt(vv / c2) + cfg.adam_eps);
      };
      for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t i = 0; i < layers[l].weights.rows(); ++i)
          for (std::size_t j = 0; j < layers[l].weights.cols(); ++j)
            update(layers[l].weights(i, j), g.weights[l](i, j), m.weights[l](i, j), v.weights[l](i, j));
        for (std::size_t i = 0; i < layers[l].bias.size(); ++i)
          update(layers[l].bias[i], g.biases[l][i], m.biases[l][i], v.biases[l][i]);
      }
    }
    if (rec.diverged) break;
    rec.epochs_run = epoch + 1;
    const double acc = accuracy(assemble(net.activation(), layers), data.test);
    rec.max_test_accuracy = std::max(rec.max_test_accuracy, acc);
    if (acc == 1.0) break;
  }
  rec.reached_100 = rec.max_test_accuracy == 1.0;
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Network trained = rec.diverged ? net : assemble(net.activation(), std::move(layers));
  return {std::move(trained), rec};
}

SweepResult sweep(const SweepConfig& cfg) {
  if (cfg.repeats == 0) throw InputError("sweep: repeats must be at least 1");
  struct Job {
    std::size_t d_in, depth, width, repeat;
  };
  std::vector<Job> jobs;
  for (std::size_t d : cfg.dims)
    for (std::size_t depth : cfg.depths)
      for (int off : cfg.width_offsets) {
        const long w = static_cast<long>(d) + off;
        if (w < 1) throw InputError("sweep: width offset makes a layer empty");
        for (std::size_t r = 0; r < cfg.repeats; ++r) jobs.push_back({d, depth, static_cast<std::size_t>(w), r});
      }

  // One dataset per input dimension, seeded from the base seed.
  std::vector<std::size_t> dims = cfg.dims;
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  std::vector<SphereDatasetConfig> data_cfgs;
  std::vector<SphereDataset> datasets;
  for (std::size_t d : dims) {
    SphereDatasetConfig dc = SphereDatasetConfig::defaults(d);
    dc.n_train_per_class = cfg.n_train_per_class;
    dc.n_test_per_class = cfg.n_test_per_class;
    dc.seed = cfg.base_seed ^ (0x5151'0000ULL + d);
    data_cfgs.push_back(dc);
    datasets.push_back(make_sphere_dataset(dc));
  }

  SweepResult result;
  result.records.resize(jobs.size());
  result.repeat_index.resize(jobs.size());
  parallel_for(jobs.size(), resolve_threads(cfg.threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Job& job = jobs[i];
      const std::size_t di = static_cast<std::size_t>(std::find(dims.begin(), dims.end(), job.d_in) - dims.begin());
      TrainConfig tc;
      tc.layer_widths.push_back(job.d_in);
      for (std::size_t k = 0; k < job.depth; ++k) tc.layer_widths.push_back(job.width);
      tc.layer_widths.push_back(2);
      tc.activation = cfg.activation;
      tc.learning_rate = cfg.learning_rate;
      tc.batch_size = std::min(cfg.batch_size, datasets[di].train.size());
      tc.epochs = cfg.epochs;
      tc.seed = cfg.base_seed ^ static_cast<std::uint64_t>(i);
      Network net = init_mlp(tc.layer_widths, tc.activation, tc.seed);
      result.records[i] = train(std::move(net), datasets[di], tc, data_cfgs[di]).record;
      result.repeat_index[i] = job.repeat;
    }
  });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& job = jobs[i];
    auto it = std::find_if(result.settings.begin(), result.settings.end(), [&](const SettingSummary& s) {
      return s.d_in == job.d_in && s.depth == job.depth && s.width == job.width;
    });
    if (it == result.settings.end()) {
      result.settings.push_back({job.d_in, job.depth, job.width, 0, 0, 0.0});
      it = std::prev(result.settings.end());
    }
    ++it->runs;
    it->successes += result.records[i].reached_100 ? 1 : 0;
    it->best_accuracy = std::max(it->best_accuracy, result.records[i].max_test_accuracy);
  }
  return result;
}

std::string sweep_csv(const SweepResult& result, bool include_timing) {
  std::ostringstream out;
  out << "d_in,depth,width,repeat,seed,max_test_acc,reached_100,epochs_run,wall_time_s\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const RunRecord& r = result.records[i];
    const auto& w = r.train.layer_widths;
    out << r.data.d_in << "," << (w.size() - 2) << "," << w[1] << "," << result.repeat_index[i] << "," << r.train.seed
        << "," << r.max_test_accuracy << "," << (r.reached_100 ? 1 : 0) << "," << r.epochs_run << ","
        << (include_timing ? r.wall_time_s : 0.0) << "\n";
  }
  return out.str();
}

Json sweep_aggregate_json(const SweepResult& result) {
  Json settings = Json::array();
  for (const auto& s : result.settings)
    settings.push_back({{"d_in", s.d_in},
                        {"depth", s.depth},
                        {"width", s.width},
                        {"width_offset", static_cast<long>(s.width) - static_cast<long>(s.d_in)},
                        {"runs", s.runs},
                        {"successes", s.successes},
                        {"success_rate", s.success_rate()},
                        {"best_test_accuracy", s.best_accuracy}});
  return {{"settings", settings}, {"head", "softmax2"}};
}

}  // namespace narrownet
