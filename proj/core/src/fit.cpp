#include "sphconv/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "batched.hpp"
#include "sphconv/error.hpp"

namespace sphconv {

namespace {

// Normal matrices above this condition number are treated as rank deficient.
constexpr double kMaxCondition = 1e12;

}  // namespace

namespace detail {

double normal_condition(const Eigen::MatrixXd& normal) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

void require_well_posed(const Eigen::MatrixXd& normal, std::size_t samples, std::size_t coeffs,
                        double lambda) {
  const double cond = normal_condition(normal);
  if ((lambda == 0.0 && samples < coeffs) || !(cond <= kMaxCondition))
    throw IllPosedFit(samples, coeffs, cond);
}

}  // namespace detail

FitOperator::FitOperator(std::vector<Direction> gradients, int order, double lambda)
    : basis_(order), gradients_(std::move(gradients)), lambda_(lambda) {
  if (gradients_.empty()) throw InvalidArgument("fit operator needs at least one gradient");
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw InvalidArgument("regularization weight must be finite and >= 0, got " +
                          std::to_string(lambda));

  design_ = eval_basis(gradients_, order);
  Eigen::MatrixXd normal = design_.transpose() * design_;
  normal.diagonal() += lambda * laplace_beltrami_diag(order);

  detail::require_well_posed(normal, gradients_.size(), basis_.coeff_count(), lambda);
  condition_ = detail::normal_condition(normal);

  const Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success)
    throw IllPosedFit(gradients_.size(), basis_.coeff_count(), condition_);
  fit_ = llt.solve(design_.transpose());
}

FitOperator make_fit_operator(std::span<const Direction> gradients, int order, double lambda) {
  return FitOperator(std::vector<Direction>(gradients.begin(), gradients.end()), order, lambda);
}

ShVolume signal_to_sh(const DwiVolume& vol, const FitOperator& op, const ExecPolicy& policy) {
  const Shape5& in = vol.data.shape();
  const std::size_t n = op.sample_count();
  if (in.channels != vol.shells * n)
    throw ShapeError("expected " + std::to_string(vol.shells * n) + " channels (" +
                     std::to_string(vol.shells) + " shell(s) x " + std::to_string(n) +
                     " gradients), got " + std::to_string(in.channels));

  const std::size_t r = op.basis().coeff_count();
  const std::size_t spatial = in.spatial();
  Volume5 out = Volume5::uninitialized(Shape5{in.subjects, vol.shells * r, in.nx, in.ny, in.nz});
  for (std::size_t s = 0; s < in.subjects; ++s)
    for (std::size_t shell = 0; shell < vol.shells; ++shell)
      detail::apply_operator(op.matrix(), vol.data.channels(s, shell * n), spatial,
                             out.channels(s, shell * r), spatial, spatial, policy);
  return ShVolume(std::move(out), op.basis(), vol.shells);
}

ShVolume signal_to_sh(const DwiVolume& vol, std::span<const FitOperator> per_shell,
                      const ExecPolicy& policy) {
  if (per_shell.size() != vol.shells)
    throw ShapeError("got " + std::to_string(per_shell.size()) + " fit operators for " +
                     std::to_string(vol.shells) + " shell(s)");
  const ShBasisSpec basis = per_shell.front().basis();
  const std::size_t n = vol.samples_per_shell();
  for (const FitOperator& op : per_shell) {
    if (op.basis() != basis) throw ShapeError("per-shell fit operators differ in SH order");
    if (op.sample_count() != n)
      throw ShapeError("fit operator expects " + std::to_string(op.sample_count()) +
                       " samples per shell, volume has " + std::to_string(n));
  }

  const Shape5& in = vol.data.shape();
  const std::size_t r = basis.coeff_count();
  const std::size_t spatial = in.spatial();
  Volume5 out = Volume5::uninitialized(Shape5{in.subjects, vol.shells * r, in.nx, in.ny, in.nz});
  for (std::size_t s = 0; s < in.subjects; ++s)
    for (std::size_t shell = 0; shell < vol.shells; ++shell)
      detail::apply_operator(per_shell[shell].matrix(), vol.data.channels(s, shell * n), spatial,
                             out.channels(s, shell * r), spatial, spatial, policy);
  return ShVolume(std::move(out), basis, vol.shells);
}

DwiVolume sh_to_signal(const ShVolume& sh, std::span<const Direction> gradients,
                       const ExecPolicy& policy) {
  const std::vector<Direction> shared(gradients.begin(), gradients.end());
  const std::vector<std::vector<Direction>> per_shell(sh.shells, shared);
  return sh_to_signal(sh, per_shell, policy);
}

DwiVolume sh_to_signal(const ShVolume& sh, std::span<const std::vector<Direction>> per_shell,
                       const ExecPolicy& policy) {
  if (per_shell.size() != sh.shells)
    throw ShapeError("got " + std::to_string(per_shell.size()) + " direction sets for " +
                     std::to_string(sh.shells) + " shell(s)");
  const std::size_t n = per_shell.front().size();
  if (n == 0) throw InvalidArgument("sh_to_signal needs at least one direction");
  for (const auto& dirs : per_shell)
    if (dirs.size() != n) throw ShapeError("per-shell direction sets differ in length");

  const Shape5& in = sh.data.shape();
  const std::size_t r = sh.basis.coeff_count();
  const std::size_t spatial = in.spatial();
  Volume5 out = Volume5::uninitialized(Shape5{in.subjects, sh.shells * n, in.nx, in.ny, in.nz});
  for (std::size_t shell = 0; shell < sh.shells; ++shell) {
    const RowMatrix basis = eval_basis(per_shell[shell], sh.basis.order());
    for (std::size_t s = 0; s < in.subjects; ++s)
      detail::apply_operator(basis, sh.data.channels(s, shell * r), spatial,
                             out.channels(s, shell * n), spatial, spatial, policy);
  }
  return DwiVolume(std::move(out), sh.shells);
}

NormalizedDwi normalize_b0(const Array4& raw, std::span<const double> bvals,
                           double b0_threshold) {
  if (bvals.size() != raw.volumes())
    throw ShapeError("got " + std::to_string(bvals.size()) + " b-values for " +
                     std::to_string(raw.volumes()) + " volumes");

  std::vector<std::size_t> b0s;
  std::vector<std::size_t> dws;
  for (std::size_t t = 0; t < bvals.size(); ++t) (bvals[t] <= b0_threshold ? b0s : dws).push_back(t);
  if (b0s.empty())
    throw MissingB0("no b0 volume (b <= " + std::to_string(b0_threshold) + ") in acquisition");

  const std::size_t spatial = raw.spatial();
  std::vector<double> mean_b0(spatial, 0.0);
  for (std::size_t t : b0s) {
    const auto vol = raw.volume(t);
    for (std::size_t v = 0; v < spatial; ++v) mean_b0[v] += vol[v];
  }
  for (double& m : mean_b0) m /= static_cast<double>(b0s.size());

  const double peak = spatial ? *std::max_element(mean_b0.begin(), mean_b0.end()) : 0.0;
  const double eps = 1e-6 * peak;

  NormalizedDwi out;
  out.signal = Array4({raw.dims[0], raw.dims[1], raw.dims[2], dws.size()});
  out.source_volumes = dws;
  out.excluded.assign(spatial, 0);
  for (std::size_t v = 0; v < spatial; ++v)
    if (!(mean_b0[v] > eps)) out.excluded[v] = 1;

  for (std::size_t i = 0; i < dws.size(); ++i) {
    const auto src = raw.volume(dws[i]);
    auto dst = out.signal.volume(i);
    for (std::size_t v = 0; v < spatial; ++v)
      dst[v] = out.excluded[v] ? 0.0 : src[v] / mean_b0[v];
  }
  return out;
}

}  // namespace sphconv
