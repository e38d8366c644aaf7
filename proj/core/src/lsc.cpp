#include "sphconv/lsc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "batched.hpp"
#include "sphconv/error.hpp"

namespace sphconv {

std::size_t kernel_length(std::span<const int> kernel_sizes) {
  if (kernel_sizes.empty()) throw InvalidArgument("kernel_sizes must not be empty");
  std::size_t k = 1;
  for (int n : kernel_sizes) {
    if (n < 1) throw InvalidArgument("kernel ring sizes must be >= 1, got " + std::to_string(n));
    k += static_cast<std::size_t>(n);
  }
  return k;
}

namespace {

std::vector<int> checked_sizes(std::vector<int> sizes, double alpha) {
  kernel_length(sizes);
  if (!(alpha > 0.0))
    throw InvalidArgument("angular distance must be positive, got " + std::to_string(alpha));
  if (!(alpha * static_cast<double>(sizes.size()) < std::numbers::pi / 2))
    throw InvalidArgument("outermost ring at " + std::to_string(alpha * sizes.size()) +
                          " rad reaches the hemisphere boundary (pi/2)");
  return sizes;
}

}  // namespace

LscGeometry::LscGeometry(std::vector<Direction> origins, std::vector<int> kernel_sizes,
                         double alpha, int order_in, int order_out, double lambda)
    : kernel_sizes_(checked_sizes(std::move(kernel_sizes), alpha)),
      alpha_(alpha),
      order_in_(order_in),
      kernel_length_(sphconv::kernel_length(kernel_sizes_)),
      refit_(std::move(origins), order_out, lambda) {
  const std::size_t r_in = coeff_count(order_in);
  const auto dirs = refit_.gradients();
  const std::size_t k = kernel_length_;

  neighbors_.reserve(dirs.size() * (k - 1));
  for (const Direction& u : dirs)
    for (std::size_t ring = 0; ring < kernel_sizes_.size(); ++ring) {
      const auto pts = ring_directions(u, alpha_ * static_cast<double>(ring + 1), kernel_sizes_[ring]);
      neighbors_.insert(neighbors_.end(), pts.begin(), pts.end());
    }

  resample_.resize(static_cast<Eigen::Index>(dirs.size() * k), static_cast<Eigen::Index>(r_in));
  auto row = [&](std::size_t i) {
    return std::span<double>(resample_.row(static_cast<Eigen::Index>(i)).data(), r_in);
  };
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    eval_basis_row(dirs[i], order_in, row(i * k));
    for (std::size_t j = 1; j < k; ++j) eval_basis_row(neighbors_[i * (k - 1) + j - 1], order_in, row(i * k + j));
  }
}

std::span<const Direction> LscGeometry::neighborhood(std::size_t origin) const {
  const std::size_t n = kernel_length_ - 1;
  return std::span<const Direction>(neighbors_).subspan(origin * n, n);
}

LscGeometry build_lsc_geometry(std::span<const Direction> gradients,
                               std::span<const int> kernel_sizes, double alpha, int order_in,
                               int order_out, double lambda) {
  return LscGeometry(std::vector<Direction>(gradients.begin(), gradients.end()),
                     std::vector<int>(kernel_sizes.begin(), kernel_sizes.end()), alpha, order_in,
                     order_out, lambda);
}

LscKernel::LscKernel(std::size_t shells_in, std::size_t shells_out, std::size_t length)
    : LscKernel(shells_in, shells_out, length,
                std::vector<double>(shells_in * shells_out * length, 0.0),
                std::vector<double>(shells_out, 0.0)) {}

LscKernel::LscKernel(std::size_t shells_in, std::size_t shells_out, std::size_t length,
                     std::vector<double> weights, std::vector<double> bias)
    : shells_in_(shells_in),
      shells_out_(shells_out),
      length_(length),
      weights_(std::move(weights)),
      bias_(std::move(bias)) {
  if (shells_in_ == 0 || shells_out_ == 0 || length_ == 0)
    throw InvalidArgument("kernel dimensions must be positive");
  if (weights_.size() != shells_in_ * shells_out_ * length_)
    throw ShapeError("kernel has " + std::to_string(weights_.size()) + " weights, expected " +
                     std::to_string(shells_in_ * shells_out_ * length_));
  if (bias_.size() != shells_out_)
    throw ShapeError("kernel has " + std::to_string(bias_.size()) + " biases, expected " +
                     std::to_string(shells_out_));
  for (double w : weights_)
    if (!std::isfinite(w)) throw InvalidArgument("kernel weights must be finite");
  for (double b : bias_)
    if (!std::isfinite(b)) throw InvalidArgument("kernel bias must be finite");
}

LscKernel make_moving_average_kernel(std::span<const int> kernel_sizes, std::size_t shells_in,
                                     std::size_t shells_out) {
  const std::size_t k = kernel_length(kernel_sizes);
  const double w = 1.0 / static_cast<double>(shells_in * k);
  return LscKernel(shells_in, shells_out, k, std::vector<double>(shells_in * shells_out * k, w),
                   std::vector<double>(shells_out, 0.0));
}

DwiVolume lsc_response(const ShVolume& sh_in, const LscKernel& kernel, const LscGeometry& geom,
                       const ExecPolicy& policy) {
  if (sh_in.basis.order() != geom.order_in())
    throw ShapeError("input SH order " + std::to_string(sh_in.basis.order()) +
                     " does not match geometry order " + std::to_string(geom.order_in()));
  if (sh_in.shells != kernel.shells_in())
    throw ShapeError("kernel expects " + std::to_string(kernel.shells_in()) +
                     " input shell(s), signal has " + std::to_string(sh_in.shells));
  if (kernel.length() != geom.kernel_length())
    throw ShapeError("kernel length " + std::to_string(kernel.length()) +
                     " does not match geometry kernel length " +
                     std::to_string(geom.kernel_length()));

  const Shape5& in = sh_in.data.shape();
  const std::size_t r_in = sh_in.basis.coeff_count();
  const std::size_t m = geom.origins().size();
  const std::size_t k = geom.kernel_length();
  const std::size_t spatial = in.spatial();
  const RowMatrix& resample = geom.resample_matrix();

  Volume5 out = Volume5::uninitialized(Shape5{in.subjects, kernel.shells_out() * m, in.nx, in.ny, in.nz});
  for (std::size_t s = 0; s < in.subjects; ++s) {
    detail::for_each_chunk(spatial, policy, [&](std::size_t begin, std::size_t end) {
      const std::size_t width = end - begin;
      std::vector<double> samples(kernel.shells_in() * m * k * width);
      for (std::size_t si = 0; si < kernel.shells_in(); ++si)
        detail::apply_operator_range(resample, sh_in.data.channels(s, si * r_in) + begin, spatial,
                                     samples.data() + si * m * k * width, width, 0, width);

      for (std::size_t so = 0; so < kernel.shells_out(); ++so)
        for (std::size_t i = 0; i < m; ++i) {
          double* dst = out.channels(s, so * m + i) + begin;
          std::fill(dst, dst + width, kernel.bias(so));
          for (std::size_t si = 0; si < kernel.shells_in(); ++si)
            for (std::size_t j = 0; j < k; ++j) {
              const double w = kernel.weight(so, si, j);
              const double* src = samples.data() + ((si * m + i) * k + j) * width;
              for (std::size_t v = 0; v < width; ++v) dst[v] += w * src[v];
            }
        }
    });
  }
  return DwiVolume(std::move(out), kernel.shells_out());
}

ShVolume lsc_forward(const ShVolume& sh_in, const LscKernel& kernel, const LscGeometry& geom,
                     const ExecPolicy& policy) {
  return signal_to_sh(lsc_response(sh_in, kernel, geom, policy), geom.refit(), policy);
}

}  // namespace sphconv
