// End-to-end acceptance run: one PASS/FAIL line per criterion, exit 0 only
// if all pass. CLI subcommands run in-process through run_cli.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "narrownet/cli.hpp"
#include "narrownet/escape.hpp"
#include "narrownet/geometry.hpp"
#include "narrownet/invertible.hpp"
#include "narrownet/regions.hpp"
#include "narrownet/sphere.hpp"
#include "support/random_nets.hpp"

using namespace narrownet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::current_path() / "acceptance_artifacts";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string artifact(const std::string& name) { return (work_dir() / name).string(); }

// Runs a subcommand; a non-zero exit is reported through `code`.
int cli(const std::vector<std::string>& args, std::string* captured = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (captured) *captured = out.str();
  if (code != 0) std::cerr << "  [cli " << args.front() << " exit " << code << "] " << err.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << v;
  return s.str();
}

long double example1_exact(long double x1, long double x2) {
  const long double r2 = std::sqrt(2.0L);
  const long double z1 = (x1 + x2) / r2 + r2;
  const long double z2 = (x2 - x1) / r2 - 1.0L / r2;
  return std::max(z1, 0.0L) / r2 - 4.0L * std::max(z2, 0.0L) / r2 - 0.25L;
}

// Same bound as the unit tests: unit round-off times every intermediate size.
double forward_roundoff(const Network& net, std::span<const double> p) {
  double gain = 1.0, size = norm2(p);
  for (const auto& l : net.hidden()) {
    gain *= std::max(1.0, op_norm(l.weights));
    size = std::max(size, gain * norm2(p) + norm2(l.bias));
  }
  gain *= std::max(1.0, op_norm(net.output().weights));
  return 64.0 * std::numeric_limits<double>::epsilon() * gain * (size + 1.0);
}

Outcome criterion1() {
  const Network net = build_example_net(ExampleId::example1);
  const double pts[][3] = {{0, 0, 0.75}, {-1, -1, -0.25}, {-1, 1, -1.25}, {-1, 0, 0.25}, {-2, -2, -0.25}};
  double worst = 0.0;
  bool ok = true;
  for (const auto& p : pts) {
    const double f = net.forward(Vector{p[0], p[1]})[0];
    const long double exact = example1_exact(p[0], p[1]);
    const double err = static_cast<double>(std::abs(static_cast<long double>(f) - exact));
    worst = std::max(worst, err);
    ok = ok && err <= 1e-12 && std::abs(exact - p[2]) <= 1e-15L;
  }
  return {ok, "max |F - exact| = " + fmt(worst)};
}

Outcome criterion2() {
  const std::string net = artifact("example1.json");
  if (cli({"example", "--id", "1", "--out", net})) return {false, "example failed"};
  std::string detail;
  bool ok = true;
  for (int res : {256, 512, 1024}) {
    const std::string rep = artifact("example1_res" + std::to_string(res) + ".json");
    if (cli({"analyze", "--net", net, "--box", "-1", "1", "--res", std::to_string(res), "--out", rep}))
      return {false, "analyze failed"};
    const Json neg = read_json_file(rep)["classes"]["neg"]["components"];
    std::size_t touching = 0;
    for (const auto& c : neg) touching += c["touches_boundary"].get<bool>() ? 1 : 0;
    ok = ok && neg.size() == 2 && touching == 2;
    detail += "res " + std::to_string(res) + ": neg " + std::to_string(neg.size()) + " (" + std::to_string(touching) +
              " touching); ";
  }
  const std::string a = artifact("example1_a.pgm"), b = artifact("example1_b.pgm");
  if (cli({"render", "--net", net, "--box", "-1", "1", "--res", "512", "--out", a, "--threads", "1"}) ||
      cli({"render", "--net", net, "--box", "-1", "1", "--res", "512", "--out", b}))
    return {false, "render failed"};
  const bool stable = slurp(a) == slurp(b) && slurp(a).rfind("P5\n", 0) == 0;
  detail += stable ? "PGM byte-stable" : "PGM differs between reruns";
  if (cli({"render", "--net", net, "--box", "-1", "1", "--res", "512", "--out", artifact("example1.svg")}))
    return {false, "svg render failed"};
  return {ok && stable, detail};
}

Outcome criterion3() {
  Json record;
  std::string detail, matching;
  int matches = 0;
  for (const std::string id : {"2-literal", "2-corrected"}) {
    const std::string net = artifact("example" + id + ".json");
    const std::string rep = artifact("example" + id + "_res512.json");
    if (cli({"example", "--id", id, "--out", net}) ||
        cli({"analyze", "--net", net, "--box", "-4", "4", "--res", "512", "--out", rep}))
      return {false, "cli failed for " + id};
    const Json report = read_json_file(rep);
    std::size_t neg = 0, neg_touching = 0, pos = 0;
    for (const auto& c : report["classes"]["neg"]["components"]) {
      ++neg;
      neg_touching += c["touches_boundary"].get<bool>() ? 1 : 0;
    }
    pos = report["classes"]["pos"]["components"].size();
    record[id] = {{"neg_components", neg}, {"neg_touching_boundary", neg_touching}, {"pos_components", pos},
                  {"tie_cells", report["tie_cells"]}};
    detail += id + ": neg " + std::to_string(neg) + " (" + std::to_string(neg_touching) + " touching), pos " +
              std::to_string(pos) + "; ";
    if (neg == 2 && neg_touching == 2) {
      ++matches;
      matching = id;
    }
  }
  record["variant_with_two_unbounded_neg_components"] = matching.empty() ? Json(nullptr) : Json(matching);
  write_file_atomic(artifact("example2_discrepancy.json"), record.dump(2) + "\n");
  detail += "disconnected variant: " + (matching.empty() ? std::string("none") : matching);
  return {matches == 1, detail};
}

Outcome criterion4() {
  testsupport::Rng rng(4004);
  std::size_t total = 0, violations = 0, escalations = 0, witnessed = 0;
  std::string detail;
  for (const Activation act : {Activation::relu(), Activation::leaky_relu(0.1), Activation::tanh()}) {
    std::size_t act_violations = 0;
    for (std::size_t d : {2, 3}) {
      std::vector<Network> nets;
      for (int i = 0; i < 100; ++i) nets.push_back(testsupport::random_narrow_net(rng, act, d, 5));
      for (const auto& r : boundary_touch_suite(nets, Box::cube(d, -2, 2), 128)) {
        ++total;
        escalations += r.escalated ? 1 : 0;
        witnessed += r.witnessed;
        act_violations += r.violations.size();
        for (const auto& v : r.violations) {
          std::cerr << "  violation: " << to_string(act.kind) << " d=" << d << " class " << v.cls << " cells "
                    << v.cell_count << " at (";
          for (double x : v.seed_point) std::cerr << x << " ";
          std::cerr << ")\n";
        }
      }
    }
    violations += act_violations;
    detail += to_string(act.kind) + " " + std::to_string(act_violations) + " violations; ";
  }
  detail += std::to_string(total) + " nets, " + std::to_string(escalations) + " escalated, " +
            std::to_string(witnessed) + " sub-cell grid components cleared by escape paths";
  return {violations == 0 && total == 600, detail};
}

Outcome criterion5() {
  const Network bump = testsupport::bump_net();
  const auto r = boundary_touch_suite(std::span<const Network>(&bump, 1), Box::cube(2, -2, 2), 128);
  const auto& v = r[0].violations;
  const bool ok = !r[0].narrow && v.size() == 1 && v[0].cls == kNegClass && norm2(v[0].seed_point) < 1.0;
  std::string detail = "width " + std::to_string(bump.width()) + " net: " + std::to_string(v.size()) +
                       " bounded component(s) reported at res " + std::to_string(r[0].resolution_used);
  if (!v.empty()) detail += ", class " + bump.class_name(v[0].cls) + ", " + std::to_string(v[0].cell_count) + " cells";
  return {ok, detail};
}

Outcome criterion6() {
  testsupport::Rng rng(6006);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  std::size_t bad = 0;
  double worst_ratio = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = dim(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, d)(rng);
    const Matrix m = n ? testsupport::random_matrix(rng, n, d) : Matrix(0, d);
    const Vector x = testsupport::random_vector(rng, d);
    Vector c = matvec(m, x);
    for (double& ci : c) ci += std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    const Polyhedron p(m, c);
    const Vector v = unbounded_direction(p, x);
    const double nv = norm2(v), scale = n ? op_norm(m) : 1.0;
    bool ok = nv > 0.0 && contains(p, axpy(1e6, v, x));
    for (double e : matvec(m, v)) {
      ok = ok && e <= 1e-9 * scale * nv;
      worst_ratio = std::max(worst_ratio, e / (scale * nv));
    }
    bad += ok ? 0 : 1;
  }
  return {bad == 0, std::to_string(1000 - bad) + "/1000 sound, max (Mv)_i/(|M||v|) = " + fmt(worst_ratio)};
}

Outcome criterion7() {
  testsupport::Rng rng(7007);
  std::size_t bad = 0, pad_bad = 0;
  double worst = 0.0;
  const Activation acts[] = {Activation::relu(), Activation::leaky_relu(0.1), Activation::tanh()};
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 2 + static_cast<std::size_t>(t % 2);
    const Network net = testsupport::random_narrow_net(rng, acts[t % 3], d, 4);
    const Box box = Box::cube(d, -1, 1);
    const auto samples = box_samples(box, 10000);
    const Network padded = pad_square(net);
    for (const auto& x : samples) pad_bad += padded.forward(x) == net.forward(x) ? 0 : 1;
    for (double eps : {1e-2, 1e-3}) {
      const auto r = invertibilize_network(net, box, eps, 10000, 0);
      bool ok = true;
      for (const auto& l : r.net.hidden()) {
        const Vector sv = singular_values(l.weights);
        ok = ok && sv.back() > 1e-12 * sv.front();
      }
      double sup = 0.0;
      for (const auto& x : samples) sup = std::max(sup, norm2(axpy(-1.0, net.forward(x), r.net.forward(x))));
      worst = std::max(worst, sup / eps);
      bad += ok && sup < eps ? 0 : 1;
    }
  }
  const std::string net = artifact("example1.json");
  std::string report;
  const int code = cli({"invertibilize", "--net", net, "--box", "-1", "1", "--eps", "1e-3", "--out",
                        artifact("example1_inv.json")},
                       &report);
  const bool cli_ok = code == 0 && Json::parse(report)["measured_sup_error"].get<double>() < 1e-3;
  return {bad == 0 && pad_bad == 0 && cli_ok,
          std::to_string(100 - bad) + "/100 (net, eps) pairs ok, max sup/eps = " + fmt(worst) +
              ", pad_square mismatches " + std::to_string(pad_bad)};
}

Outcome criterion8() {
  testsupport::Rng rng(8008);
  std::size_t verified = 0, attempted = 0, analytic = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 2 + static_cast<std::size_t>(t % 2);
    const Network raw = testsupport::random_square_net(rng, Activation::relu(), d, 3);
    const Network net = invertibilize_network(raw, Box::cube(d, -1, 1), 1e-3, 1000).net;
    Vector x0 = testsupport::uniform_point(rng, d, -1, 1);
    while (!net.decide(x0)) x0 = testsupport::uniform_point(rng, d, -1, 1);
    ++attempted;
    try {
      const EscapeCertificate cert = escape_certificate(net, x0);
      analytic += cert.analytic_terminal ? 1 : 0;
      const VerificationReport r = verify_certificate(net, cert, 64, 1e3);
      verified += r.constant_class && r.violations == 0 && r.max_radius_checked >= 1e3 ? 1 : 0;
    } catch (const Error& e) {
      std::cerr << "  net " << t << ": " << e.what() << "\n";
    }
  }

  // Example-1 seed through the CLI.
  const std::string net_path = artifact("example1.json"), cert_path = artifact("example1_cert.json");
  std::string verify_out;
  if (cli({"escape", "--net", net_path, "--seed-point", "-0.9", "-0.9", "--rmax", "1000", "--out", cert_path}) ||
      cli({"verify", "--net", net_path, "--cert", cert_path}, &verify_out))
    return {false, "Example-1 certificate failed through the CLI"};
  const Network ex = load_network(net_path);
  const EscapeCertificate cert = certificate_from_json(ex, read_json_file(cert_path));
  const double f0 = ex.forward(cert.vertices.back())[0];
  // Slope of the affine piece along the ray, and the drift of F in float64.
  const AffinePiece piece = affine_collapse(ex, cert.vertices.back());
  const double slope = std::abs(dot(piece.matrix.row(0), cert.direction));
  bool within = true;
  std::string drift;
  for (double lambda : {1.0, 10.0, 1e3, 1e6}) {
    const Vector p = axpy(lambda, cert.direction, cert.vertices.back());
    const double dev = std::abs(ex.forward(p)[0] - f0);
    within = within && dev <= forward_roundoff(ex, p) && ex.decide(p) == cert.cls;
    drift += fmt(dev) + (lambda < 1e6 ? "," : "");
  }
  const bool ex_ok = cert.analytic_terminal && Json::parse(verify_out)["constant_class"] == true &&
                     slope <= 4 * std::numeric_limits<double>::epsilon() && within;
  return {verified == attempted && attempted == 100 && ex_ok,
          std::to_string(verified) + "/" + std::to_string(attempted) + " verified (" + std::to_string(analytic) +
              " analytic); Example-1 analytic, slope along ray " + fmt(slope) + ", |F - F(x0)| at 1,10,1e3,1e6 = " +
              drift + " (within float64 round-off)"};
}

Outcome criterion9() {
  testsupport::Rng rng(9009);
  double worst = 0.0;
  std::size_t samples = 0;
  const Activation acts[] = {Activation::relu(), Activation::leaky_relu(0.1), Activation::tanh()};
  for (int n = 0; n < 10; ++n) {
    const std::size_t d = 3 + static_cast<std::size_t>(n % 3);
    std::uniform_int_distribution<std::size_t> first(1, d - 1);
    const std::size_t d1 = first(rng);
    const Network net = testsupport::from_widths(rng, acts[n % 3], {d, d1, std::max<std::size_t>(d1, 1), 1});
    const auto basis = kernel_directions(net);
    if (basis.empty()) return {false, "no kernel directions for a net with d_1 < d_in"};
    for (int s = 0; s < 10; ++s, ++samples) {
      const Vector x = testsupport::uniform_point(rng, d, -1, 1);
      const double t = std::uniform_real_distribution<double>(-10, 10)(rng);
      const Vector& v = basis[static_cast<std::size_t>(s) % basis.size()];
      worst = std::max(worst, std::abs(net.forward(x)[0] - net.forward(axpy(t, v, x))[0]));
    }
  }
  return {worst <= 1e-12 && samples == 100, std::to_string(samples) + " samples, max |F(x) - F(x+tv)| = " + fmt(worst)};
}

Outcome criterion10() {
  testsupport::Rng rng(1010);
  const double h = 1e-6;
  double relu_worst = 0.0, tanh_worst = 0.0;
  int relu_nets = 0;
  std::normal_distribution<double> normal(0.0, 1.0);
  auto batch = [&](std::size_t d) {
    Dataset b;
    for (int i = 0; i < 16; ++i) {
      Vector x(d);
      for (double& v : x) v = normal(rng);
      b.x.push_back(std::move(x));
      b.y.push_back(i % 2);
    }
    return b;
  };
  for (int t = 0; t < 20; ++t)
    tanh_worst = std::max(tanh_worst, grad_check(init_mlp({3, 4, 3, 2}, Activation::tanh(), 500 + t), batch(3), h));
  for (int t = 0; relu_nets < 20 && t < 1000; ++t) {
    const Network net = init_mlp({3, 4, 3, 2}, Activation::relu(), 700 + static_cast<std::uint64_t>(t));
    try {
      relu_worst = std::max(relu_worst, grad_check(net, batch(3), h));
      ++relu_nets;
    } catch (const PreconditionError&) {
      // batch landed within 10h of a kink; draw another net and batch
    }
  }
  std::string out;
  const bool cli_ok = cli({"gradcheck", "--widths", "2", "3", "2", "--activation", "tanh"}, &out) == 0 &&
                      Json::parse(out)["max_relative_error"].get<double>() < 1e-6;
  return {relu_nets == 20 && relu_worst < 1e-5 && tanh_worst < 1e-6 && cli_ok,
          "relu max " + fmt(relu_worst) + " over " + std::to_string(relu_nets) + " nets, tanh max " + fmt(tanh_worst) +
              " over 20 nets"};
}

Outcome criterion11() {
  // Dataset and single-run subcommands on a small problem first.
  if (cli({"sphere-gen", "--dim", "2", "--n-train", "1000", "--n-test", "200", "--train-out",
           artifact("spheres_train.csv"), "--test-out", artifact("spheres_test.csv")}) ||
      cli({"train", "--dim", "2", "--hidden", "3", "--n-train", "1000", "--n-test", "200", "--epochs", "2", "--batch",
           "32", "--out", artifact("train_record.json"), "--net-out", artifact("trained.json")}))
    return {false, "sphere-gen or train failed"};

  const std::string csv = artifact("sweep.csv"), agg = artifact("sweep_aggregate.json");
  if (cli({"sweep", "--dims", "2", "3", "--depths", "1", "2", "--offsets", "0", "1", "--repeats", "10", "--n-train",
           "10000", "--n-test", "2000", "--epochs", "30", "--batch", "32", "--lr", "0.001", "--out", csv, "--aggregate",
           agg}))
    return {false, "sweep failed"};
  bool ok = true;
  bool found = false;
  std::string detail;
  const Json summary = read_json_file(agg);
  for (const auto& s : summary["settings"]) {
    const auto d = s["d_in"].get<std::size_t>(), depth = s["depth"].get<std::size_t>(), w = s["width"].get<std::size_t>();
    const double rate = s["success_rate"].get<double>();
    detail += "d" + std::to_string(d) + "/L" + std::to_string(depth) + "/w" + std::to_string(w) + "=" + fmt(rate) + " ";
    if (w == d) ok = ok && rate == 0.0;
    if (d == 2 && depth == 1 && w == 3) {
      found = true;
      ok = ok && rate >= 0.1;
    }
  }
  return {ok && found, detail};
}

Outcome criterion12() {
  testsupport::Rng rng(1212);
  std::size_t connected = 0, single = 0, joined = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 2 + static_cast<std::size_t>(t % 2);
    const Network net = testsupport::random_monotone_net(rng, Activation::leaky_relu(0.1), d, 4);
    try {
      const ConnectivityReport r = connectivity_report(net, Box::cube(d, -2, 2), 128);
      bool one_each = true;
      for (std::size_t c = 0; c < r.grid_components.size(); ++c) {
        one_each = one_each && r.grid_components[c] <= 1;
        joined += r.joined[c];
      }
      single += one_each ? 1 : 0;
      if (r.connected)
        ++connected;
      else
        std::cerr << "  net " << t << ": grid components of a class could not be joined\n";
    } catch (const PreconditionError& e) {
      std::cerr << "  net " << t << ": " << e.what() << "\n";
    }
  }
  return {connected == 100, std::to_string(connected) + "/100 nets connected; " + std::to_string(single) +
                                "/100 with at most one grid component per class, " + std::to_string(joined) +
                                " split components joined by lifted paths"};
}

struct Criterion {
  int id;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, 1, criterion1},     {2, 30, criterion2},   {3, 30, criterion3},   {4, 600, criterion4},
      {5, 10, criterion5},    {6, 10, criterion6},   {7, 120, criterion7},  {8, 120, criterion8},
      {9, 5, criterion9},     {10, 30, criterion10}, {11, 1200, criterion11}, {12, 300, criterion12}};
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << "  " << o.detail << "  [" << std::fixed
              << std::setprecision(2) << secs << " s" << (in_time ? "" : ", over the " + fmt(c.limit_s) + " s limit")
              << "]" << std::defaultfloat << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
