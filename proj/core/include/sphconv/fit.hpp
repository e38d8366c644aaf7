#pragma once

// Regularized least-squares transform between q-space samples and SH
// coefficients:
//
//   M = (B^T B + lambda * diag(LB))^-1 B^T,   c = M s
//
// M is factored once per gradient set and then applied to whole volumes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sphconv/exec.hpp"
#include "sphconv/linalg.hpp"
#include "sphconv/sh_basis.hpp"
#include "sphconv/volume.hpp"

namespace sphconv {

/// b-values at or below this count as non-diffusion-weighted (s/mm^2).
inline constexpr double kB0Threshold = 50.0;

/// Immutable fit matrix for one gradient set; safe to share between threads.
class FitOperator {
 public:
  /// Throws IllPosedFit when the penalized normal matrix is singular (for
  /// lambda = 0 this includes every case with fewer samples than
  /// coefficients).
  FitOperator(std::vector<Direction> gradients, int order, double lambda);

  const ShBasisSpec& basis() const noexcept { return basis_; }
  std::span<const Direction> gradients() const noexcept { return gradients_; }
  std::size_t sample_count() const noexcept { return gradients_.size(); }
  double lambda() const noexcept { return lambda_; }

  /// R x N fit matrix M.
  const RowMatrix& matrix() const noexcept { return fit_; }
  /// N x R basis matrix B at the gradients.
  const Eigen::MatrixXd& design() const noexcept { return design_; }
  /// 2-norm condition number of B^T B + lambda * diag(LB).
  double condition() const noexcept { return condition_; }

 private:
  ShBasisSpec basis_;
  std::vector<Direction> gradients_;
  double lambda_;
  Eigen::MatrixXd design_;
  RowMatrix fit_;
  double condition_ = 0.0;
};

FitOperator make_fit_operator(std::span<const Direction> gradients, int order, double lambda);

/// Fits every shell of `vol` with the same operator.
ShVolume signal_to_sh(const DwiVolume& vol, const FitOperator& op, const ExecPolicy& policy = {});

/// Fits shell s with per_shell[s]; all operators must share one SH order.
ShVolume signal_to_sh(const DwiVolume& vol, std::span<const FitOperator> per_shell,
                      const ExecPolicy& policy = {});

/// Evaluates every shell at the same directions.
DwiVolume sh_to_signal(const ShVolume& sh, std::span<const Direction> gradients,
                       const ExecPolicy& policy = {});

/// Evaluates shell s at per_shell[s]; every set must have the same length.
DwiVolume sh_to_signal(const ShVolume& sh, std::span<const std::vector<Direction>> per_shell,
                       const ExecPolicy& policy = {});

struct NormalizedDwi {
  /// Diffusion-weighted volumes divided by the mean b0, acquisition order.
  Array4 signal;
  /// Acquisition index of each volume in `signal`.
  std::vector<std::size_t> source_volumes;
  /// 1 where the mean b0 is at or below the division threshold; those voxels
  /// are 0 in `signal`.
  std::vector<std::uint8_t> excluded;

  DwiVolume as_dwi() const { return DwiVolume(to_volume5(signal), 1); }
};

/// Divides each diffusion-weighted volume by the voxel-wise mean of all b0
/// volumes. Voxels whose mean b0 is <= 1e-6 * (max mean b0) are set to 0 and
/// flagged. Throws MissingB0 if no b-value is <= b0_threshold.
NormalizedDwi normalize_b0(const Array4& raw, std::span<const double> bvals,
                           double b0_threshold = kB0Threshold);

namespace detail {

/// Condition estimate of a symmetric normal matrix; infinity when singular.
double normal_condition(const Eigen::MatrixXd& normal);

/// Shared ill-posedness contract for every fitting path.
void require_well_posed(const Eigen::MatrixXd& normal, std::size_t samples, std::size_t coeffs,
                        double lambda);

}  // namespace detail

}  // namespace sphconv
