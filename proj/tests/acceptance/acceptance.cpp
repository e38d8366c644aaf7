// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names
// (AC1 ... AC10) as arguments to run a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "sphconv/bench.hpp"
#include "sphconv/fit.hpp"
#include "sphconv/gradient_table.hpp"
#include "sphconv/lsc.hpp"
#include "sphconv/nifti.hpp"
#include "sphconv/phantom.hpp"

namespace {

using namespace sphconv;
namespace fs = std::filesystem;

constexpr double kPi = std::numbers::pi;
const double kC0 = 2.0 * std::sqrt(kPi);

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : INFINITY;
}

/// Coefficients of voxel v as a vector (single subject, one shell).
Eigen::VectorXd voxel_coeffs(const Volume5& v, std::size_t voxel, std::size_t first = 0,
                             std::size_t count = 0) {
  if (count == 0) count = v.shape().channels - first;
  Eigen::VectorXd c(static_cast<Eigen::Index>(count));
  for (std::size_t j = 0; j < count; ++j) c(static_cast<Eigen::Index>(j)) = v.channel(0, first + j)[voxel];
  return c;
}

/// Phantom of `voxels` band-limited voxels on the 30-direction set, one shell
/// per b-value, normalized.
struct Normalized {
  GradientScheme scheme;
  NormalizedDwi dwi;
  std::optional<ShVolume> truth;
};

Normalized band_limited_phantom(std::array<std::size_t, 3> dims, int order, std::uint64_t seed,
                                std::size_t directions = 30, std::vector<double> bvalues = {1000}) {
  const GradientScheme scheme = make_scheme(repulsion_directions(directions), bvalues, 1);
  const Phantom p = make_phantom({.dims = dims, .generator = BandLimitedSignal{.order = order, .seed = seed}}, scheme);
  return {scheme, normalize_b0(p.raw, scheme.bvals()), p.truth};
}

Outcome ac1() {
  const Normalized ph = band_limited_phantom({100, 1, 1}, 4, 101);
  const auto dirs = ph.scheme.directions(ph.scheme.shells().shells[0]);
  const DwiVolume dwi = ph.dwi.as_dwi();
  const auto start = std::chrono::steady_clock::now();
  const FitOperator op = make_fit_operator(dirs, 4, 0.0);
  const DwiVolume back = sh_to_signal(signal_to_sh(dwi, op), dirs);
  const double secs = elapsed(start);
  const double err = max_abs_diff(back.data.data(), dwi.data.data());
  return {err <= 1e-9 && secs < 1.0, fmt("max abs error %.3e (<= 1e-9), runtime %.4f s (< 1 s)", err, secs)};
}

Outcome ac2() {
  const GradientScheme scheme = make_scheme(repulsion_directions(30), std::vector<double>{1000}, 1);
  const Phantom p = make_phantom({.dims = {3, 3, 3}, .generator = ConstantSignal{1.0}}, scheme);
  const DwiVolume dwi = normalize_b0(p.raw, scheme.bvals()).as_dwi();
  const auto dirs = scheme.directions(scheme.shells().shells[0]);
  double c0_err = 0.0, rest = 0.0;
  for (double lambda : {0.0, 0.006, 0.06}) {
    const ShVolume sh = signal_to_sh(dwi, make_fit_operator(dirs, 4, lambda));
    for (std::size_t v = 0; v < sh.data.shape().spatial(); ++v) {
      const Eigen::VectorXd c = voxel_coeffs(sh.data, v);
      c0_err = std::max(c0_err, std::abs(c(0) - kC0));
      rest = std::max(rest, c.tail(c.size() - 1).cwiseAbs().maxCoeff());
    }
  }
  return {c0_err <= 1e-10 && rest <= 1e-10,
          fmt("|c0 - 2*sqrt(pi)| max %.3e, other coefficients max %.3e (both <= 1e-10) over lambda {0, 0.006, 0.06}",
              c0_err, rest)};
}

Outcome ac3() {
  double worst = 0.0;
  for (int order : {2, 4, 6, 8}) {
    const Normalized ph = band_limited_phantom({100, 100, 1}, order, 300 + order, 90);
    const auto dirs = ph.scheme.directions(ph.scheme.shells().shells[0]);
    const DwiVolume dwi = ph.dwi.as_dwi();
    for (double lambda : {0.0, 0.006}) {
      const ShVolume batched = signal_to_sh(dwi, make_fit_operator(dirs, order, lambda));
      const ShVolume naive = naive_signal_to_sh(dwi, dirs, order, lambda);
      worst = std::max(worst, max_abs_diff(batched.data.data(), naive.data.data()));
    }
  }
  return {worst <= 1e-12, fmt("10000 voxels, orders {2,4,6,8}, lambda {0, 0.006}: max abs deviation %.3e (<= 1e-12)", worst)};
}

double speedup(const BenchReport& r, const char* direction, int order, std::size_t voxels) {
  return r.find(direction, order, voxels, "naive")->seconds / r.find(direction, order, voxels, "batched")->seconds;
}

Outcome ac4() {
  BenchOptions full;  // orders {2,4,6,8}, 450000 voxels, 3 repeats, single thread
  const auto start = std::chrono::steady_clock::now();
  const BenchReport report = run_bench(full);
  const double full_secs = elapsed(start);

  std::vector<std::size_t> sweep{1000, 10000, 100000};
  std::vector<BenchReport> sweep_reports;
  for (std::size_t v : sweep) {
    BenchOptions o;
    o.orders = {8};
    o.voxel_count = v;
    sweep_reports.push_back(run_bench(o));
  }
  sweep.push_back(full.voxel_count);
  sweep_reports.push_back(report);

  std::ostringstream detail;
  bool monotone = true;
  double prev = 0.0;
  detail << "order 8 signal2sh speedup";
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const double s = speedup(sweep_reports[i], "signal2sh", 8, sweep[i]);
    const BenchReport& r = sweep_reports[i];
    detail << (i ? ", " : " ") << sweep[i] << ": "
           << fmt("%.2fx (%.4g/%.4g s)", s, r.find("signal2sh", 8, sweep[i], "naive")->seconds,
                  r.find("signal2sh", 8, sweep[i], "batched")->seconds);
    monotone = monotone && s >= prev;
    prev = s;
  }
  const double at_full = prev;
  detail << " (>= 5x at 450000: " << (at_full >= 5.0 ? "yes" : "no") << "; non-decreasing: " << (monotone ? "yes" : "no")
         << "); sh2signal speedup";
  for (std::size_t i = 0; i < sweep.size(); ++i)
    detail << (i ? ", " : " ") << sweep[i] << ": " << fmt("%.2fx", speedup(sweep_reports[i], "sh2signal", 8, sweep[i]));
  double dev = 0.0;
  for (const BenchRow& r : report.rows) dev = std::max(dev, r.max_dev);
  detail << fmt("; max_dev %.3e; full benchmark %.1f s (< 600 s)", dev, full_secs);
  return {at_full >= 5.0 && monotone && full_secs < 600.0 && dev <= 1e-12, detail.str()};
}

ShVolume sh_of(const Eigen::MatrixXd& coeffs, int order, std::size_t shells = 1) {
  Volume5 data(Shape5{1, static_cast<std::size_t>(coeffs.rows()), static_cast<std::size_t>(coeffs.cols()), 1, 1});
  for (Eigen::Index c = 0; c < coeffs.rows(); ++c)
    for (Eigen::Index v = 0; v < coeffs.cols(); ++v)
      data.at(0, static_cast<std::size_t>(c), static_cast<std::size_t>(v), 0, 0) = coeffs(c, v);
  return ShVolume(std::move(data), ShBasisSpec(order), shells);
}

Outcome ac5() {
  const auto dirs = repulsion_directions(30);
  const std::vector<int> sizes{5};
  const LscGeometry geom = build_lsc_geometry(dirs, sizes, kPi / 5, 4, 4, 0.0);
  LscKernel identity(1, 1, geom.kernel_length());
  identity.weight(0, 0, 0) = 1.0;
  std::mt19937_64 gen(505);
  Eigen::MatrixXd c(15, 100);
  for (Eigen::Index v = 0; v < 100; ++v) c.col(v) = oracle::random_vector(15, gen);
  const ShVolume in = sh_of(c, 4);
  const ShVolume out = lsc_forward(in, identity, geom);
  const double err = max_abs_diff(out.data.data(), in.data.data());
  return {err <= 1e-9, fmt("identity kernel, lambda 0, 100 voxels: max abs error %.3e (<= 1e-9)", err)};
}

Outcome ac6() {
  const Normalized ph = band_limited_phantom({100, 1, 1}, 4, 606);
  const auto dirs = ph.scheme.directions(ph.scheme.shells().shells[0]);
  const ShVolume in = signal_to_sh(ph.dwi.as_dwi(), make_fit_operator(dirs, 4, 0.0));
  const std::vector<int> sizes{5};
  const LscGeometry geom = build_lsc_geometry(dirs, sizes, kPi / 5, 4, 4, 0.006);
  const LscKernel avg = make_moving_average_kernel(sizes, 1, 1);
  const ShVolume out = lsc_forward(in, avg, geom);
  double ratio = 0.0;
  for (std::size_t v = 0; v < 100; ++v)
    ratio += oracle::high_degree_fraction(voxel_coeffs(out.data, v)) / oracle::high_degree_fraction(voxel_coeffs(in.data, v));
  ratio /= 100.0;

  Eigen::MatrixXd constant = Eigen::MatrixXd::Zero(15, 10);
  constant.row(0).setConstant(kC0);
  const ShVolume cin = sh_of(constant, 4);
  const double cerr = max_abs_diff(lsc_forward(cin, avg, geom).data.data(), cin.data.data());
  return {ratio < 1.0 && cerr <= 1e-10,
          fmt("mean l>=2 energy ratio %.4f (< 1) over 100 voxels; constant signal change %.3e (<= 1e-10)", ratio, cerr)};
}

Outcome ac7() {
  const Normalized ph = band_limited_phantom({10, 10, 1}, 4, 707, 30, {1000, 2000});
  const auto dirs = ph.scheme.directions(ph.scheme.shells().shells[0]);
  const Shell* shells[] = {&ph.scheme.shells().shells[0], &ph.scheme.shells().shells[1]};
  const ShVolume both = signal_to_sh(gather_shells(ph.dwi, shells), make_fit_operator(dirs, 4, 0.006));

  const std::vector<int> sizes{5};
  const LscGeometry geom = build_lsc_geometry(dirs, sizes, kPi / 5, 4, 4, 0.006);
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LscKernel k(2, 2, 6);
  LscKernel k0(1, 1, 6), k1(1, 1, 6);
  for (std::size_t j = 0; j < 6; ++j) {
    k.weight(0, 0, j) = k0.weight(0, 0, j) = u(gen);
    k.weight(1, 1, j) = k1.weight(0, 0, j) = u(gen);
  }
  k.bias(0) = k0.bias(0) = 0.1;
  k.bias(1) = k1.bias(0) = -0.2;
  const ShVolume out = lsc_forward(both, k, geom);

  const std::size_t spatial = both.data.shape().spatial();
  double err = 0.0;
  for (std::size_t s = 0; s < 2; ++s) {
    Volume5 single(Shape5{1, 15, 10, 10, 1});
    std::copy_n(both.data.channels(0, s * 15), 15 * spatial, single.data().begin());
    const ShVolume ref = lsc_forward(ShVolume(std::move(single), ShBasisSpec(4), 1), s ? k1 : k0, geom);
    err = std::max(err, max_abs_diff(std::span<const double>(out.data.channels(0, s * 15), 15 * spatial), ref.data.data()));
  }
  return {err <= 1e-12, fmt("2-in/2-out block-diagonal kernel vs two single-shell runs: max abs deviation %.3e (<= 1e-12)", err)};
}

Outcome ac8() {
  const auto dirs = repulsion_directions(30);
  const std::vector<double> lambdas{0.0, 1e-3, 1e-2, 1e-1};
  const Eigen::MatrixXd b = eval_basis(dirs, 4);
  const Eigen::VectorXd lb = laplace_beltrami_diag(4);
  std::mt19937_64 gen(808);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Volume5 data(Shape5{1, 30, 20, 1, 1});
  for (double& x : data.data()) x = u(gen);
  const DwiVolume dwi(std::move(data), 1);
  std::vector<ShVolume> fits;
  for (double lambda : lambdas) fits.push_back(signal_to_sh(dwi, make_fit_operator(dirs, 4, lambda)));
  int violations = 0;
  for (std::size_t v = 0; v < 20; ++v) {
    Eigen::VectorXd s(30);
    for (std::size_t i = 0; i < 30; ++i) s(static_cast<Eigen::Index>(i)) = dwi.data.channel(0, i)[v];
    double prev_res = -1.0, prev_pen = INFINITY;
    for (const ShVolume& f : fits) {
      const Eigen::VectorXd c = voxel_coeffs(f.data, v);
      const double res = (b * c - s).norm();
      const double pen = c.dot(lb.cwiseProduct(c));
      violations += (res < prev_res) + (pen > prev_pen);
      prev_res = res;
      prev_pen = pen;
    }
  }
  return {violations == 0, fmt("20 voxels, lambda {0, 1e-3, 1e-2, 1e-1}: %.0f violations (0 allowed)", violations)};
}

int run_cli(std::vector<std::string> args, std::string* err_out = nullptr) {
  args.insert(args.begin(), "sphconv");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_out) *err_out = err.str();
  return code;
}

Outcome ac9() {
  const fs::path dir = oracle::temp_dir("acceptance_io");
  std::mt19937_64 gen(909);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  Array4 a({8, 8, 8, 20});
  for (double& x : a.values) x = u(gen);
  Eigen::Matrix4d aff = Eigen::Matrix4d::Identity();
  aff.diagonal().head<3>() << 2.0, 2.0, 2.5;
  aff.col(3).head<3>() << -90, 126, -72;
  write_nifti(dir / "rand.nii.gz", a, aff);
  const NiftiImage img = read_nifti(dir / "rand.nii.gz");
  double rel = img.data.dims == a.dims ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < a.values.size() && img.data.values.size() == a.values.size(); ++i)
    rel = std::max(rel, std::abs(img.data.values[i] - a.values[i]) / std::abs(a.values[i]));
  const double aff_err = (img.affine - aff).cwiseAbs().maxCoeff();

  // Valid image for the CLI runs, so only the gradient files are at fault.
  Array4 dwi({2, 2, 2, 3}, 1.0);
  write_nifti(dir / "dwi.nii", dwi);
  const std::vector<std::pair<std::string, std::string>> fixtures{
      {"0 1000 1000", "0 1 0\n0 0 1\n0 0 0\n1 1 1\n"},   // four bvecs rows
      {"0 1000 1e3x", "0 1 0\n0 0 1\n0 0 0\n"},          // bad bvals token
      {"0 1000 1000", "0 1 0\n0 zero 1\n0 0 0\n"},       // bad bvecs token
      {"0 1000 1000 1000", "0 1 0\n0 0 1\n0 0 0\n"},     // length mismatch
      {"0 1000 1000", "0 1 0\n0 0\n0 0 0\n"},            // ragged rows
      {"", ""},                                          // empty
      {"0 1000 1000", "0 0 0\n0 0 1\n0 0 0\n"},          // zero vector at b=1000
      {"0 1000 1000", "0 1\n0 0\n"},                     // two rows
  };
  int rejected = 0;
  for (std::size_t i = 0; i < fixtures.size(); ++i) {
    const fs::path bv = dir / ("m" + std::to_string(i) + ".bvals");
    const fs::path bc = dir / ("m" + std::to_string(i) + ".bvecs");
    std::ofstream(bv) << fixtures[i].first;
    std::ofstream(bc) << fixtures[i].second;
    rejected += run_cli({"signal2sh", "--dwi", (dir / "dwi.nii").string(), "--bvals", bv.string(), "--bvecs",
                         bc.string(), "--out", (dir / "m.nii").string()}) == 2;
  }
  fs::remove_all(dir);
  const bool pass = rel <= 1e-6 && aff_err <= 1e-5 && rejected == static_cast<int>(fixtures.size());
  return {pass, fmt("8x8x8x20 round trip max relative error %.3e (<= 1e-6), affine error %.1e; "
                    "%.0f of %.0f malformed gradient fixtures exit 2",
                    rel, aff_err, rejected, static_cast<double>(fixtures.size()))};
}

Outcome ac10() {
  const fs::path dir = oracle::temp_dir("acceptance_e2e");
  auto p = [&](const char* name) { return (dir / name).string(); };
  std::string err;
  int code = run_cli({"phantom", "--out-prefix", p("ph"), "--dims", "5,5,4", "--generator", "bandlimited",
                      "--order", "4", "--seed", "10"}, &err);
  std::ostringstream trail;
  trail << "phantom=" << code;
  if (code == 0) {
    code = run_cli({"signal2sh", "--dwi", p("ph.nii.gz"), "--bvals", p("ph.bvals"), "--bvecs", p("ph.bvecs"),
                    "--order", "4", "--out", p("sh.nii.gz")}, &err);
    trail << " signal2sh=" << code;
  }
  if (code == 0) {
    code = run_cli({"lsc", "--sh", p("sh.nii.gz"), "--bvals", p("ph.bvals"), "--bvecs", p("ph.bvecs"),
                    "--moving-average", "5,0.6283185307", "--out", p("smooth.nii.gz")}, &err);
    trail << " lsc=" << code;
  }
  if (code == 0) {
    code = run_cli({"sh2signal", "--sh", p("smooth.nii.gz"), "--bvals", p("ph.bvals"), "--bvecs", p("ph.bvecs"),
                    "--out", p("signal.nii.gz")}, &err);
    trail << " sh2signal=" << code;
  }
  if (code != 0) {
    fs::remove_all(dir);
    return {false, trail.str() + ": " + err};
  }
  const Array4 before = read_nifti(p("sh.nii.gz")).data;
  const Array4 after = read_nifti(p("smooth.nii.gz")).data;
  const Array4 signal = read_nifti(p("signal.nii.gz")).data;
  double ratio = 0.0;
  for (std::size_t v = 0; v < before.spatial(); ++v) {
    Eigen::VectorXd a(15), b(15);
    for (std::size_t j = 0; j < 15; ++j) {
      a(static_cast<Eigen::Index>(j)) = before.volume(j)[v];
      b(static_cast<Eigen::Index>(j)) = after.volume(j)[v];
    }
    ratio += oracle::high_degree_fraction(b) / oracle::high_degree_fraction(a);
  }
  ratio /= static_cast<double>(before.spatial());
  const bool shape_ok = signal.dims == std::array<std::size_t, 4>{5, 5, 4, 30};
  fs::remove_all(dir);
  return {ratio < 1.0 && shape_ok,
          trail.str() + fmt("; mean l>=2 energy ratio from files %.4f (< 1); output volumes %.0f", ratio,
                            static_cast<double>(signal.dims[3]))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
      {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.contains(name)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << name << (o.pass ? " PASS " : " FAIL ") << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
