#include "sphconv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

#include "sphconv/error.hpp"
#include "sphconv/fit.hpp"
#include "sphconv/phantom.hpp"

namespace sphconv {

ShVolume naive_signal_to_sh(const DwiVolume& vol, std::span<const Direction> gradients,
                            int order, double lambda) {
  const ShBasisSpec basis(order);
  const std::size_t n = gradients.size();
  const std::size_t r = basis.coeff_count();
  if (n == 0) throw InvalidArgument("fit needs at least one gradient");
  const Shape5& in = vol.data.shape();
  if (in.channels != vol.shells * n)
    throw ShapeError("expected " + std::to_string(vol.shells * n) + " channels, got " +
                     std::to_string(in.channels));

  const Eigen::VectorXd penalty = lambda * laplace_beltrami_diag(order);
  const std::size_t spatial = in.spatial();
  Volume5 out = Volume5::uninitialized(Shape5{in.subjects, vol.shells * r, in.nx, in.ny, in.nz});

  const auto ri = static_cast<Eigen::Index>(r);
  Eigen::MatrixXd b(static_cast<Eigen::Index>(n), ri);
  Eigen::MatrixXd normal(ri, ri);
  Eigen::LLT<Eigen::MatrixXd> llt(ri);
  Eigen::VectorXd s(static_cast<Eigen::Index>(n));
  Eigen::VectorXd rhs(ri);
  Eigen::VectorXd c(ri);
  std::vector<double> row(r);
  bool checked = false;
  for (std::size_t subj = 0; subj < in.subjects; ++subj)
    for (std::size_t shell = 0; shell < vol.shells; ++shell)
      for (std::size_t v = 0; v < spatial; ++v) {
        for (std::size_t i = 0; i < n; ++i) {
          const auto k = static_cast<Eigen::Index>(i);
          eval_basis_row(gradients[i], order, row);
          for (Eigen::Index j = 0; j < ri; ++j) b(k, j) = row[static_cast<std::size_t>(j)];
          s(k) = vol.data.channel(subj, shell * n + i)[v];
        }
        normal.noalias() = b.transpose() * b;
        normal.diagonal() += penalty;
        if (!checked) {
          detail::require_well_posed(normal, n, r, lambda);
          checked = true;
        }
        llt.compute(normal);
        if (llt.info() != Eigen::Success) throw IllPosedFit(n, r, detail::normal_condition(normal));
        rhs.noalias() = b.transpose() * s;
        c = llt.solve(rhs);
        for (std::size_t j = 0; j < r; ++j) out.channel(subj, shell * r + j)[v] = c(static_cast<Eigen::Index>(j));
      }
  if (!checked) {
    // Empty volume: still honour the ill-posedness contract.
    const Eigen::MatrixXd bb = eval_basis(gradients, order);
    Eigen::MatrixXd normal = bb.transpose() * bb;
    normal.diagonal() += penalty;
    detail::require_well_posed(normal, n, r, lambda);
  }
  return ShVolume(std::move(out), basis, vol.shells);
}

DwiVolume naive_sh_to_signal(const ShVolume& sh, std::span<const Direction> gradients) {
  const std::size_t n = gradients.size();
  const std::size_t r = sh.basis.coeff_count();
  if (n == 0) throw InvalidArgument("sh_to_signal needs at least one direction");
  const Shape5& in = sh.data.shape();
  const std::size_t spatial = in.spatial();
  Volume5 out = Volume5::uninitialized(Shape5{in.subjects, sh.shells * n, in.nx, in.ny, in.nz});

  std::vector<double> row(r);
  for (std::size_t subj = 0; subj < in.subjects; ++subj)
    for (std::size_t shell = 0; shell < sh.shells; ++shell)
      for (std::size_t v = 0; v < spatial; ++v)
        for (std::size_t i = 0; i < n; ++i) {
          eval_basis_row(gradients[i], sh.basis.order(), row);
          double acc = 0.0;
          for (std::size_t j = 0; j < r; ++j) acc += row[j] * sh.data.channel(subj, shell * r + j)[v];
          out.channel(subj, shell * n + i)[v] = acc;
        }
  return DwiVolume(std::move(out), sh.shells);
}

void BenchReport::write_csv(std::ostream& os) const {
  os << "direction,order,voxels,method,seconds,max_dev\n";
  const auto flags = os.flags();
  const auto prec = os.precision();
  for (const BenchRow& r : rows) {
    os << r.direction << ',' << r.order << ',' << r.voxels << ',' << r.method << ','
       << std::setprecision(6) << r.seconds << ',' << std::setprecision(3) << std::scientific
       << r.max_dev << '\n';
    os.flags(flags);
  }
  os.precision(prec);
}

const BenchRow* BenchReport::find(const std::string& direction, int order, std::size_t voxels,
                                  const std::string& method) const {
  for (const BenchRow& r : rows)
    if (r.direction == direction && r.order == order && r.voxels == voxels && r.method == method)
      return &r;
  return nullptr;
}

namespace {

template <typename F>
double seconds(F&& run) {
  const auto start = std::chrono::steady_clock::now();
  run();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> t) {
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

/// Median wall times of `fast` and `slow`. One untimed `fast` run warms the
/// caches; the timed runs alternate between the two methods.
template <typename Fast, typename Slow>
std::pair<double, double> paired_medians(int repeats, Fast&& fast, Slow&& slow) {
  fast();
  std::vector<double> tf, ts;
  for (int i = 0; i < repeats; ++i) {
    tf.push_back(seconds(fast));
    ts.push_back(seconds(slow));
  }
  return {median(std::move(tf)), median(std::move(ts))};
}

/// Median wall time of `run` after one untimed run.
template <typename F>
double median_seconds(int repeats, F&& run) {
  run();
  std::vector<double> t;
  for (int i = 0; i < repeats; ++i) t.push_back(seconds(run));
  return median(std::move(t));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Random band-limited coefficients, one voxel per column of a flat
/// (voxels x 1 x 1) grid.
ShVolume synthetic_coefficients(int order, std::size_t voxels, std::uint64_t seed) {
  const ShBasisSpec basis(order);
  Volume5 c(Shape5{1, basis.coeff_count(), voxels, 1, 1});
  std::mt19937_64 gen(seed ^ (static_cast<std::uint64_t>(order) << 32));
  for (double& x : c.data()) x = static_cast<double>(gen() >> 11) * 0x1.0p-52 - 1.0;
  for (double& x : c.channel(0, 0)) x += 2.0 * std::sqrt(std::numbers::pi);
  return ShVolume(std::move(c), basis, 1);
}

}  // namespace

BenchReport run_bench(const BenchOptions& options) {
  if (options.repeats < 3) throw InvalidArgument("benchmark needs at least 3 repeats");
  const std::vector<Direction> dirs = repulsion_directions(options.directions);
  const std::size_t voxels = options.voxel_count;
  const ExecPolicy serial{1};
  const ExecPolicy parallel{options.threads};

  BenchReport report;
  for (int order : options.orders) {
    const ShVolume truth = synthetic_coefficients(order, voxels, options.seed);
    const DwiVolume signal = sh_to_signal(truth, dirs, serial);

    // signal -> SH
    {
      ShVolume batched, naive;
      const auto [t_batched, t_naive] = paired_medians(
          options.repeats,
          [&] {
            const FitOperator op = make_fit_operator(dirs, order, options.lambda);
            batched = signal_to_sh(signal, op, serial);
          },
          [&] { naive = naive_signal_to_sh(signal, dirs, order, options.lambda); });
      const double dev = max_abs_diff(batched.data.data(), naive.data.data());
      report.rows.push_back({"signal2sh", order, voxels, "batched", t_batched, dev});
      report.rows.push_back({"signal2sh", order, voxels, "naive", t_naive, 0.0});
      if (options.threads > 1) {
        ShVolume par;
        const double t_par = median_seconds(options.repeats, [&] {
          const FitOperator op = make_fit_operator(dirs, order, options.lambda);
          par = signal_to_sh(signal, op, parallel);
        });
        report.rows.push_back({"signal2sh", order, voxels, "batched_parallel", t_par,
                               max_abs_diff(par.data.data(), naive.data.data())});
      }
    }

    // SH -> signal
    {
      DwiVolume batched, naive;
      const auto [t_batched, t_naive] = paired_medians(
          options.repeats, [&] { batched = sh_to_signal(truth, dirs, serial); },
          [&] { naive = naive_sh_to_signal(truth, dirs); });
      const double dev = max_abs_diff(batched.data.data(), naive.data.data());
      report.rows.push_back({"sh2signal", order, voxels, "batched", t_batched, dev});
      report.rows.push_back({"sh2signal", order, voxels, "naive", t_naive, 0.0});
      if (options.threads > 1) {
        DwiVolume par;
        const double t_par = median_seconds(options.repeats, [&] { par = sh_to_signal(truth, dirs, parallel); });
        report.rows.push_back({"sh2signal", order, voxels, "batched_parallel", t_par,
                               max_abs_diff(par.data.data(), naive.data.data())});
      }
    }
  }
  return report;
}

}  // namespace sphconv
