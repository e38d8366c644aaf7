#pragma once

// Real, even-degree spherical harmonic basis in the "descoteaux07" convention
// used throughout diffusion MRI:
//
//   m < 0 : sqrt(2) * Re(Y_l^|m|)
//   m = 0 : Y_l^0
//   m > 0 : sqrt(2) * Im(Y_l^m)
//
// with orthonormal complex Y_l^m carrying the Condon-Shortley phase.
// Coefficient j for (l, m) is l(l+1)/2 + m, l even.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace sphconv {

/// Unit 3-vector. Construction normalizes; zero or non-finite input throws
/// InvalidArgument.
class Direction {
 public:
  Direction(double x, double y, double z);
  explicit Direction(const Eigen::Vector3d& v) : Direction(v.x(), v.y(), v.z()) {}

  double x() const noexcept { return v_.x(); }
  double y() const noexcept { return v_.y(); }
  double z() const noexcept { return v_.z(); }
  const Eigen::Vector3d& vec() const noexcept { return v_; }

  double dot(const Direction& o) const noexcept { return v_.dot(o.v_); }
  Direction operator-() const;

  /// Polar angle from +z.
  double theta() const;
  /// Azimuth from +x.
  double phi() const;

 private:
  struct Unchecked {};
  Direction(Unchecked, const Eigen::Vector3d& v) : v_(v) {}

  Eigen::Vector3d v_;
};

/// Maximum even degree L and the matching coefficient count.
class ShBasisSpec {
 public:
  explicit ShBasisSpec(int order);

  int order() const noexcept { return order_; }
  std::size_t coeff_count() const noexcept { return coeff_count_; }

  /// Basis whose coefficient count is exactly `count`, if any.
  static std::optional<ShBasisSpec> from_coeff_count(std::size_t count);

  friend bool operator==(const ShBasisSpec&, const ShBasisSpec&) = default;

 private:
  int order_;
  std::size_t coeff_count_;
};

/// (L+1)(L+2)/2; throws InvalidArgument for odd or negative L.
std::size_t coeff_count(int order);

std::size_t sh_index(int l, int m);

/// Inverse of sh_index: the (l, m) pair stored at coefficient `j`.
std::pair<int, int> sh_degree_order(std::size_t j);

/// One row of the basis matrix: out[j] = Y_j(u). out.size() must equal
/// coeff_count(order).
void eval_basis_row(const Direction& u, int order, std::span<double> out);

/// N x R matrix of basis values, one row per direction.
Eigen::MatrixXd eval_basis(std::span<const Direction> dirs, int order);

/// Diagonal of the Laplace-Beltrami penalty, l^2 (l+1)^2 per coefficient.
Eigen::VectorXd laplace_beltrami_diag(int order);

struct TangentFrame {
  Direction e1;
  Direction e2;
};

/// Right-handed orthonormal frame {e1, e2, u}. The reference axis is +z
/// unless |u.z| > 0.9, in which case +x is used.
TangentFrame tangent_basis(const Direction& u);

/// n points on the circle at angular distance alpha around u; point k sits at
/// azimuth 2*pi*k/n measured from e1 of tangent_basis(u).
std::vector<Direction> ring_directions(const Direction& u, double alpha, int n);

}  // namespace sphconv
