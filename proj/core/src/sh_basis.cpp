#include "sphconv/sh_basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "sphconv/error.hpp"

namespace sphconv {

Direction::Direction(double x, double y, double z) {
  const Eigen::Vector3d v(x, y, z);
  const double norm = v.norm();
  if (!std::isfinite(norm) || norm == 0.0)
    throw InvalidArgument("direction must be a finite non-zero vector");
  v_ = v / norm;
}

Direction Direction::operator-() const { return Direction(Unchecked{}, -v_); }

double Direction::theta() const { return std::acos(std::clamp(v_.z(), -1.0, 1.0)); }

double Direction::phi() const { return std::atan2(v_.y(), v_.x()); }

ShBasisSpec::ShBasisSpec(int order) : order_(order), coeff_count_(sphconv::coeff_count(order)) {}

std::optional<ShBasisSpec> ShBasisSpec::from_coeff_count(std::size_t count) {
  for (int order = 0;; order += 2) {
    const std::size_t r = sphconv::coeff_count(order);
    if (r == count) return ShBasisSpec(order);
    if (r > count) return std::nullopt;
  }
}

std::size_t coeff_count(int order) {
  if (order < 0 || order % 2 != 0)
    throw InvalidArgument("SH order must be even and non-negative, got " + std::to_string(order));
  const auto l = static_cast<std::size_t>(order);
  return (l + 1) * (l + 2) / 2;
}

std::size_t sh_index(int l, int m) {
  if (l < 0 || l % 2 != 0)
    throw InvalidArgument("SH degree must be even and non-negative, got " + std::to_string(l));
  if (m < -l || m > l)
    throw InvalidArgument("SH order m=" + std::to_string(m) + " outside [-l, l] for l=" +
                          std::to_string(l));
  return static_cast<std::size_t>(l * (l + 1) / 2 + m);
}

std::pair<int, int> sh_degree_order(std::size_t j) {
  // Degree l owns the index block [l(l-1)/2, l(l+1)/2 + l].
  int l = 0;
  while (static_cast<std::size_t>((l + 2) * (l + 3) / 2 - (l + 2)) <= j) l += 2;
  return {l, static_cast<int>(j) - l * (l + 1) / 2};
}

void eval_basis_row(const Direction& u, int order, std::span<double> out) {
  const std::size_t r = coeff_count(order);
  if (out.size() != r)
    throw ShapeError("basis row has " + std::to_string(out.size()) + " entries, expected " +
                     std::to_string(r));

  // Even degrees are antipodally symmetric; evaluating at a canonical member
  // of {u, -u} makes the two rows bit-identical.
  const bool flip = u.z() < 0.0 || (u.z() == 0.0 && (u.y() < 0.0 || (u.y() == 0.0 && u.x() < 0.0)));
  const Direction v = flip ? -u : u;

  const double x = std::clamp(v.z(), -1.0, 1.0);
  const double s = std::hypot(v.x(), v.y());
  const double phi = v.phi();

  // Orthonormal associated Legendre functions P~_l^m(x) (Condon-Shortley phase
  // included), forward recurrence in l for each fixed m.
  double pmm = 0.5 / std::sqrt(std::numbers::pi);
  for (int m = 0; m <= order; ++m) {
    if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;

    const double cos_m = std::cos(m * phi);
    const double sin_m = std::sin(m * phi);
    auto store = [&](int l, double p) {
      if (l % 2 != 0) return;
      const std::size_t base = static_cast<std::size_t>(l * (l + 1) / 2);
      if (m == 0) {
        out[base] = p;
      } else {
        out[base - static_cast<std::size_t>(m)] = std::numbers::sqrt2 * p * cos_m;
        out[base + static_cast<std::size_t>(m)] = std::numbers::sqrt2 * p * sin_m;
      }
    };

    double p_prev2 = pmm;
    store(m, pmm);
    if (m + 1 > order) continue;
    double p_prev1 = x * std::sqrt(2.0 * m + 3.0) * pmm;
    store(m + 1, p_prev1);
    for (int l = m + 2; l <= order; ++l) {
      const double ll = static_cast<double>(l) * l;
      const double mm = static_cast<double>(m) * m;
      const double a = std::sqrt((4.0 * ll - 1.0) / (ll - mm));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - mm) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      const double p = a * (x * p_prev1 - b * p_prev2);
      store(l, p);
      p_prev2 = p_prev1;
      p_prev1 = p;
    }
  }
}

Eigen::MatrixXd eval_basis(std::span<const Direction> dirs, int order) {
  if (dirs.empty()) throw InvalidArgument("eval_basis needs at least one direction");
  const std::size_t r = coeff_count(order);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> b(
      static_cast<Eigen::Index>(dirs.size()), static_cast<Eigen::Index>(r));
  for (std::size_t i = 0; i < dirs.size(); ++i)
    eval_basis_row(dirs[i], order, std::span<double>(b.row(static_cast<Eigen::Index>(i)).data(), r));
  return b;
}

Eigen::VectorXd laplace_beltrami_diag(int order) {
  const std::size_t r = coeff_count(order);
  Eigen::VectorXd diag(static_cast<Eigen::Index>(r));
  for (int l = 0; l <= order; l += 2) {
    const double v = static_cast<double>(l) * l * (l + 1.0) * (l + 1.0);
    for (int m = -l; m <= l; ++m) diag(static_cast<Eigen::Index>(sh_index(l, m))) = v;
  }
  return diag;
}

TangentFrame tangent_basis(const Direction& u) {
  const Eigen::Vector3d a =
      std::abs(u.z()) > 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitZ();
  const Direction e1(a.cross(u.vec()));
  const Direction e2(u.vec().cross(e1.vec()));
  return {e1, e2};
}

std::vector<Direction> ring_directions(const Direction& u, double alpha, int n) {
  if (!(alpha > 0.0 && alpha < std::numbers::pi / 2))
    throw InvalidArgument("ring angular distance must lie in (0, pi/2), got " +
                          std::to_string(alpha));
  if (n < 1) throw InvalidArgument("ring needs at least one point, got " + std::to_string(n));

  const auto [e1, e2] = tangent_basis(u);
  const double ca = std::cos(alpha);
  const double sa = std::sin(alpha);
  std::vector<Direction> ring;
  ring.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    ring.emplace_back(ca * u.vec() + sa * (std::cos(t) * e1.vec() + std::sin(t) * e2.vec()));
  }
  return ring;
}

}  // namespace sphconv
