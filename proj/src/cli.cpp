#include "narrownet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>

#include "narrownet/error.hpp"
#include "narrownet/escape.hpp"
#include "narrownet/fixture_io.hpp"
#include "narrownet/invertible.hpp"
#include "narrownet/regions.hpp"
#include "narrownet/render.hpp"
#include "narrownet/sphere.hpp"

namespace narrownet {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::size_t threads = 0;
  std::uint64_t seed = 0;

  std::string id;
  std::string net_path, cert_path, out_path, report_path, train_out, test_out, net_out, aggregate_path;
  std::vector<double> box{-1.0, 1.0};
  std::size_t res = 256;
  std::vector<double> seed_point;
  double rmax = 1e3;
  std::size_t max_segments = 32;
  std::size_t samples = 64;
  double eps = 1e-2;
  std::size_t box_samples = 10000;

  std::size_t dim = 2;
  std::size_t n_train = 10000;
  std::size_t n_test = 2000;
  std::vector<std::size_t> hidden{3};
  std::vector<std::size_t> widths{2, 2, 2};
  std::string activation = "relu";
  double leaky_beta = 0.1;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t epochs = 30;

  std::vector<std::size_t> dims{2, 3};
  std::vector<std::size_t> depths{1, 2};
  std::vector<int> offsets{0, 1};
  std::size_t repeats = 10;
  bool timing = false;

  std::size_t batch_points = 16;
  double h = 1e-6;
};

Activation make_activation(const Options& o) {
  switch (activation_kind_from_string(o.activation)) {
    case ActivationKind::relu: return Activation::relu();
    case ActivationKind::leaky_relu: return Activation::leaky_relu(o.leaky_beta);
    case ActivationKind::tanh: return Activation::tanh();
  }
  return Activation::relu();
}

// `--box lo hi` gives a cube; `--box lo1 hi1 lo2 hi2 ...` one interval per axis.
Box make_box(const std::vector<double>& values, std::size_t dim) {
  if (values.size() == 2) return Box::cube(dim, values[0], values[1]);
  if (values.size() != 2 * dim)
    throw InputError("--box needs 2 values or 2 per input dimension (" + std::to_string(2 * dim) + ")");
  Vector lo(dim), hi(dim);
  for (std::size_t a = 0; a < dim; ++a) {
    lo[a] = values[2 * a];
    hi[a] = values[2 * a + 1];
  }
  return Box(lo, hi);
}

void write_json(const std::string& path, const Json& doc, std::ostream& out) {
  if (path.empty())
    out << doc.dump(2) << "\n";
  else
    write_file_atomic(path, doc.dump(2) + "\n");
}

void resolve(std::string& path) {
  if (!path.empty()) path = fs::absolute(path).lexically_normal().string();
}

int cmd_example(const Options& o, std::ostream& out) {
  const ExampleId id = parse_example_id(o.id);
  save_network(o.out_path, build_example_net(id));
  out << "wrote example " << to_string(id) << " to " << o.out_path << "\n";
  return 0;
}

int cmd_analyze(const Options& o, std::ostream& out) {
  const Network net = load_network(o.net_path);
  const LabeledGrid grid = analyze_grid(net, make_box(o.box, net.d_in()), o.res, o.threads);
  write_json(o.out_path, component_report(net, grid), out);
  return 0;
}

int cmd_render(const Options& o, std::ostream& out) {
  const Network net = load_network(o.net_path);
  const LabeledGrid grid = analyze_grid(net, make_box(o.box, net.d_in()), o.res, o.threads);
  render_2d(grid, o.out_path);
  out << "wrote " << o.out_path << " (" << grid.components.size() << " components)\n";
  return 0;
}

int cmd_escape(const Options& o, std::ostream& out, std::ostream& err) {
  const Network net = load_network(o.net_path);
  EscapeOptions opts;
  opts.r_max = o.rmax;
  opts.max_segments = o.max_segments;
  opts.samples_per_segment = o.samples;
  try {
    const EscapeCertificate cert = escape_certificate(net, o.seed_point, opts);
    write_json(o.out_path, certificate_to_json(net, cert), out);
    return 0;
  } catch (const IncompleteCertificateError& e) {
    err << "error: " << e.what() << "\n";
    if (!o.out_path.empty()) {
      Json partial = certificate_to_json(net, e.partial());
      partial["incomplete"] = true;
      write_file_atomic(o.out_path, partial.dump(2) + "\n");
    }
    return 1;
  }
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  const Network net = load_network(o.net_path);
  const EscapeCertificate cert = certificate_from_json(net, read_json_file(o.cert_path));
  const VerificationReport report = verify_certificate(net, cert, o.samples, o.rmax);
  write_json(o.out_path, verification_to_json(report), out);
  if (!report.constant_class) {
    err << "error: certificate failed verification with " << report.violations << " class violations\n";
    return 1;
  }
  return 0;
}

int cmd_invertibilize(const Options& o, std::ostream& out, std::ostream& err) {
  const Network net = load_network(o.net_path);
  try {
    const auto result = invertibilize_network(net, make_box(o.box, net.d_in()), o.eps, o.box_samples, o.threads);
    save_network(o.out_path, result.net);
    write_json(o.report_path, report_to_json(result.report), out);
    return 0;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    if (!o.report_path.empty()) write_file_atomic(o.report_path, report_to_json(e.report()).dump(2) + "\n");
    return 1;
  }
}

SphereDatasetConfig data_config(const Options& o) {
  SphereDatasetConfig dc = SphereDatasetConfig::defaults(o.dim);
  dc.n_train_per_class = o.n_train;
  dc.n_test_per_class = o.n_test;
  dc.seed = o.seed;
  return dc;
}

int cmd_sphere_gen(const Options& o, std::ostream& out) {
  const SphereDataset ds = make_sphere_dataset(data_config(o));
  write_file_atomic(o.train_out, dataset_to_csv(ds.train));
  write_file_atomic(o.test_out, dataset_to_csv(ds.test));
  out << "wrote " << ds.train.size() << " training and " << ds.test.size() << " test points\n";
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  const SphereDatasetConfig dc = data_config(o);
  const SphereDataset ds = make_sphere_dataset(dc);
  TrainConfig tc;
  tc.layer_widths.push_back(o.dim);
  tc.layer_widths.insert(tc.layer_widths.end(), o.hidden.begin(), o.hidden.end());
  tc.layer_widths.push_back(2);
  tc.activation = make_activation(o);
  tc.learning_rate = o.lr;
  tc.batch_size = o.batch;
  tc.epochs = o.epochs;
  tc.seed = o.seed;
  TrainResult result = train(init_mlp(tc.layer_widths, tc.activation, tc.seed), ds, tc, dc);
  result.record.wall_time_s = o.timing ? result.record.wall_time_s : 0.0;
  if (!o.net_out.empty()) save_network(o.net_out, result.net);
  write_json(o.out_path, run_record_to_json(result.record), out);
  return result.record.diverged ? 1 : 0;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  SweepConfig sc;
  sc.dims = o.dims;
  sc.depths = o.depths;
  sc.width_offsets = o.offsets;
  sc.repeats = o.repeats;
  sc.base_seed = o.seed;
  sc.n_train_per_class = o.n_train;
  sc.n_test_per_class = o.n_test;
  sc.epochs = o.epochs;
  sc.batch_size = o.batch;
  sc.learning_rate = o.lr;
  sc.activation = make_activation(o);
  sc.threads = o.threads;
  const SweepResult result = sweep(sc);
  write_file_atomic(o.out_path, sweep_csv(result, o.timing));
  if (!o.aggregate_path.empty()) write_file_atomic(o.aggregate_path, sweep_aggregate_json(result).dump(2) + "\n");
  for (const auto& s : result.settings)
    out << "d_in=" << s.d_in << " depth=" << s.depth << " width=" << s.width << " success_rate=" << s.success_rate()
        << "\n";
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  Network net = o.net_path.empty() ? init_mlp(o.widths, make_activation(o), o.seed) : load_network(o.net_path);
  Rng rng(o.seed ^ 0xa5a5a5a5ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, static_cast<int>(net.d_out()) - 1);
  Dataset batch;
  for (std::size_t s = 0; s < o.batch_points; ++s) {
    Vector x(net.d_in());
    for (double& v : x) v = normal(rng);
    batch.x.push_back(std::move(x));
    batch.y.push_back(label(rng));
  }
  const double error = grad_check(net, batch, o.h);
  write_json(o.out_path, Json{{"max_relative_error", error}, {"h", o.h}, {"batch_points", o.batch_points}}, out);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Decision-region analysis for narrow neural networks", "narrownet"};
  app.set_config("--config", "", "TOML/INI file with default option values");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();

  auto threads = [&](CLI::App* sub) {
    sub->add_option("--threads", o.threads, "Worker threads (0 = NARROWNET_THREADS or all cores)");
  };
  auto seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Random seed"); };
  auto net_in = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--net", o.net_path, "Network fixture (JSON)")->check(CLI::ExistingFile);
    if (required) opt->required();
  };
  auto box = [&](CLI::App* sub) {
    sub->add_option("--box", o.box, "Box: lo hi, or lo hi per axis")->expected(2, 8);
  };
  auto res = [&](CLI::App* sub) {
    sub->add_option("--res", o.res, "Cells per axis")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 16));
  };
  auto activation = [&](CLI::App* sub) {
    sub->add_option("--activation", o.activation, "relu, leaky_relu or tanh")
        ->check(CLI::IsMember({"relu", "leaky_relu", "tanh"}));
    sub->add_option("--leaky-beta", o.leaky_beta, "Negative slope of leaky_relu")
        ->check(CLI::Range(1e-12, 1.0 - 1e-12));
  };
  auto data = [&](CLI::App* sub) {
    sub->add_option("--n-train", o.n_train, "Training points per class")->check(CLI::PositiveNumber);
    sub->add_option("--n-test", o.n_test, "Test points per class")->check(CLI::PositiveNumber);
  };
  auto training = [&](CLI::App* sub) {
    sub->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    sub->add_option("--batch", o.batch, "Minibatch size")->check(CLI::PositiveNumber);
    sub->add_option("--epochs", o.epochs, "Maximum epochs")->check(CLI::PositiveNumber);
    sub->add_flag("--timing", o.timing, "Record wall-clock time (makes output run-dependent)");
  };

  auto* example = app.add_subcommand("example", "Write a built-in example network");
  example->add_option("--id", o.id, "1, 2-literal or 2-corrected")
      ->required()
      ->check(CLI::IsMember({"1", "2-literal", "2-corrected"}));
  example->add_option("--out", o.out_path, "Output fixture")->required();

  auto* analyze = app.add_subcommand("analyze", "Grid components of every decision region");
  net_in(analyze, true);
  box(analyze);
  res(analyze);
  analyze->add_option("--out", o.out_path, "Report JSON (stdout if omitted)");
  threads(analyze);

  auto* escape = app.add_subcommand("escape", "Build an escape certificate from a seed point");
  net_in(escape, true);
  escape->add_option("--seed-point", o.seed_point, "Seed point coordinates")->required();
  escape->add_option("--rmax", o.rmax, "Verification radius")->check(CLI::PositiveNumber);
  escape->add_option("--max-segments", o.max_segments, "Polyline segment cap")->check(CLI::PositiveNumber);
  escape->add_option("--samples", o.samples, "Verification samples per segment")->check(CLI::PositiveNumber);
  escape->add_option("--out", o.out_path, "Certificate JSON (stdout if omitted)");

  auto* verify = app.add_subcommand("verify", "Re-check an escape certificate");
  net_in(verify, true);
  verify->add_option("--cert", o.cert_path, "Certificate JSON")->required()->check(CLI::ExistingFile);
  verify->add_option("--rmax", o.rmax, "Verification radius")->check(CLI::PositiveNumber);
  verify->add_option("--samples", o.samples, "Samples per segment")->check(CLI::PositiveNumber);
  verify->add_option("--out", o.out_path, "Verification JSON (stdout if omitted)");

  auto* invert = app.add_subcommand("invertibilize", "Replace hidden weights by nearby invertible ones");
  net_in(invert, true);
  box(invert);
  invert->add_option("--eps", o.eps, "Sup-error target on the box")->check(CLI::PositiveNumber);
  invert->add_option("--samples", o.box_samples, "Box sample count")->check(CLI::PositiveNumber);
  invert->add_option("--out", o.out_path, "Output fixture")->required();
  invert->add_option("--report", o.report_path, "Perturbation report JSON (stdout if omitted)");
  threads(invert);

  auto* render = app.add_subcommand("render", "Draw the 2-D decision regions as PGM or SVG");
  net_in(render, true);
  box(render);
  res(render);
  render->add_option("--out", o.out_path, "Image path (.pgm or .svg)")->required();
  threads(render);

  auto* sphere_gen = app.add_subcommand("sphere-gen", "Write a concentric-spheres dataset as CSV");
  sphere_gen->add_option("--dim", o.dim, "Input dimension")->check(CLI::Range(2, 64));
  data(sphere_gen);
  sphere_gen->add_option("--train-out", o.train_out, "Training CSV")->required();
  sphere_gen->add_option("--test-out", o.test_out, "Test CSV")->required();
  seed(sphere_gen);

  auto* train_cmd = app.add_subcommand("train", "Train one MLP on the spheres dataset");
  train_cmd->add_option("--dim", o.dim, "Input dimension")->check(CLI::Range(2, 64));
  train_cmd->add_option("--hidden", o.hidden, "Hidden layer widths")->check(CLI::PositiveNumber);
  activation(train_cmd);
  data(train_cmd);
  training(train_cmd);
  train_cmd->add_option("--out", o.out_path, "Run record JSON (stdout if omitted)");
  train_cmd->add_option("--net-out", o.net_out, "Trained network fixture");
  seed(train_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "Width-threshold sweep on the spheres dataset");
  sweep_cmd->add_option("--dims", o.dims, "Input dimensions")->check(CLI::Range(2, 64));
  sweep_cmd->add_option("--depths", o.depths, "Hidden layer counts")->check(CLI::Range(1, 64));
  sweep_cmd->add_option("--offsets", o.offsets, "Hidden width minus d_in")->check(CLI::Range(-63, 64));
  sweep_cmd->add_option("--repeats", o.repeats, "Runs per setting")->check(CLI::PositiveNumber);
  activation(sweep_cmd);
  data(sweep_cmd);
  training(sweep_cmd);
  sweep_cmd->add_option("--out", o.out_path, "Per-run CSV")->required();
  sweep_cmd->add_option("--aggregate", o.aggregate_path, "Per-setting summary JSON");
  seed(sweep_cmd);
  threads(sweep_cmd);

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare backprop with central differences");
  net_in(gradcheck, false);
  gradcheck->add_option("--widths", o.widths, "Layer widths d_in,...,d_out for a random network")
      ->check(CLI::PositiveNumber);
  activation(gradcheck);
  gradcheck->add_option("--points", o.batch_points, "Random batch size")->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", o.h, "Finite-difference step")->check(CLI::PositiveNumber);
  gradcheck->add_option("--out", o.out_path, "Result JSON (stdout if omitted)");
  seed(gradcheck);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  for (std::string* p : {&o.net_path, &o.cert_path, &o.out_path, &o.report_path, &o.train_out, &o.test_out,
                         &o.net_out, &o.aggregate_path})
    resolve(*p);

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "example") return cmd_example(o, out);
    if (name == "analyze") return cmd_analyze(o, out);
    if (name == "render") return cmd_render(o, out);
    if (name == "escape") return cmd_escape(o, out, err);
    if (name == "verify") return cmd_verify(o, out, err);
    if (name == "invertibilize") return cmd_invertibilize(o, out, err);
    if (name == "sphere-gen") return cmd_sphere_gen(o, out);
    if (name == "train") return cmd_train(o, out);
    if (name == "sweep") return cmd_sweep(o, out);
    if (name == "gradcheck") return cmd_gradcheck(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << "usage error: unknown subcommand '" << name << "'\n";
  return 2;
}

}  // namespace narrownet
