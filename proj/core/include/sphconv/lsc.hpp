#pragma once

// Local spherical convolution (applied as a cross-correlation, no kernel
// reflection). For every acquired gradient direction the SH signal is
// resampled on concentric rings around it; ring r sits at angular distance
// r * alpha and holds kernel_sizes[r-1] points. A kernel vector of length
// K = 1 + sum(kernel_sizes) (origin first, then each ring in phase order) is
// dotted with that neighborhood, giving one value per direction, which is
// refit to SH at the output order.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sphconv/exec.hpp"
#include "sphconv/fit.hpp"
#include "sphconv/linalg.hpp"
#include "sphconv/sh_basis.hpp"
#include "sphconv/volume.hpp"

namespace sphconv {

/// 1 + sum(kernel_sizes); throws InvalidArgument on an empty list or a
/// non-positive entry.
std::size_t kernel_length(std::span<const int> kernel_sizes);

class LscGeometry {
 public:
  LscGeometry(std::vector<Direction> origins, std::vector<int> kernel_sizes, double alpha,
              int order_in, int order_out, double lambda);

  std::span<const Direction> origins() const noexcept { return refit_.gradients(); }
  std::span<const int> kernel_sizes() const noexcept { return kernel_sizes_; }
  double alpha() const noexcept { return alpha_; }
  int order_in() const noexcept { return order_in_; }
  int order_out() const noexcept { return refit_.basis().order(); }
  std::size_t kernel_length() const noexcept { return kernel_length_; }

  /// Ring points of origin i, ring-major then phase order (K - 1 entries).
  std::span<const Direction> neighborhood(std::size_t origin) const;

  /// (m*K) x R_in; row i*K is the basis at origin i, rows i*K+1 .. i*K+K-1
  /// its ring points in neighborhood() order.
  const RowMatrix& resample_matrix() const noexcept { return resample_; }

  /// Fit back to SH at the m origins (order_out, lambda).
  const FitOperator& refit() const noexcept { return refit_; }

 private:
  std::vector<int> kernel_sizes_;
  double alpha_;
  int order_in_;
  std::size_t kernel_length_;
  std::vector<Direction> neighbors_;
  RowMatrix resample_;
  FitOperator refit_;
};

LscGeometry build_lsc_geometry(std::span<const Direction> gradients,
                               std::span<const int> kernel_sizes, double alpha, int order_in,
                               int order_out, double lambda);

/// Ring-kernel weights, shells_out x shells_in x K, plus one bias per output
/// shell.
class LscKernel {
 public:
  LscKernel(std::size_t shells_in, std::size_t shells_out, std::size_t length);
  LscKernel(std::size_t shells_in, std::size_t shells_out, std::size_t length,
            std::vector<double> weights, std::vector<double> bias);

  std::size_t shells_in() const noexcept { return shells_in_; }
  std::size_t shells_out() const noexcept { return shells_out_; }
  std::size_t length() const noexcept { return length_; }

  double& weight(std::size_t out, std::size_t in, std::size_t k) {
    return weights_[(out * shells_in_ + in) * length_ + k];
  }
  double weight(std::size_t out, std::size_t in, std::size_t k) const {
    return weights_[(out * shells_in_ + in) * length_ + k];
  }
  double& bias(std::size_t out) { return bias_[out]; }
  double bias(std::size_t out) const { return bias_[out]; }

  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> biases() const noexcept { return bias_; }

 private:
  std::size_t shells_in_;
  std::size_t shells_out_;
  std::size_t length_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// All weights 1 / (shells_in * K), zero bias.
LscKernel make_moving_average_kernel(std::span<const int> kernel_sizes, std::size_t shells_in,
                                     std::size_t shells_out);

/// Kernel response at the m origins before the refit: shells_out blocks of
/// m values per voxel.
DwiVolume lsc_response(const ShVolume& sh_in, const LscKernel& kernel, const LscGeometry& geom,
                       const ExecPolicy& policy = {});

/// lsc_response followed by the refit to SH at geom.order_out().
ShVolume lsc_forward(const ShVolume& sh_in, const LscKernel& kernel, const LscGeometry& geom,
                     const ExecPolicy& policy = {});

/// Kernel together with the geometry parameters it was defined for, as stored
/// in kernel JSON files:
///
///   {"shells_in": 1, "shells_out": 1, "kernel_sizes": [5],
///    "angular_distance": 0.628, "weights": [[[...]]], "bias": [0.0]}
///
/// weights is nested shells_out x shells_in x K.
struct KernelDocument {
  LscKernel kernel;
  std::vector<int> kernel_sizes;
  double angular_distance;
};

std::string kernel_to_json(const KernelDocument& doc);
/// Throws ParseError on malformed JSON or inconsistent dimensions.
KernelDocument kernel_from_json(std::string_view text);

KernelDocument read_kernel_json(const std::filesystem::path& path);
void write_kernel_json(const std::filesystem::path& path, const KernelDocument& doc);

}  // namespace sphconv
