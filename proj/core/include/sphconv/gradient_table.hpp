#pragma once

// FSL-style gradient tables: `bvals` holds one row of b-values, `bvecs` three
// rows (x, y, z) of N columns. An N x 3 bvecs layout is also accepted.
// Vectors are passed through untransformed (no scanner/image frame change).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sphconv/fit.hpp"
#include "sphconv/sh_basis.hpp"

namespace sphconv {

inline constexpr double kShellTolerance = 50.0;

struct Shell {
  double nominal_b = 0.0;
  std::vector<std::size_t> members;
};

struct ShellTable {
  std::vector<std::size_t> b0;
  /// Sorted by increasing nominal b-value.
  std::vector<Shell> shells;

  /// Shell whose nominal b is within `tolerance` of `b`, if any.
  const Shell* find(double b, double tolerance = kShellTolerance) const;
};

/// b <= b0_threshold goes to the b0 group. The rest are sorted and grouped
/// greedily: a new shell starts whenever a value exceeds the smallest value of
/// the current shell by more than `tolerance`. Nominal b is the group mean
/// rounded to the nearest multiple of 5.
ShellTable detect_shells(std::span<const double> bvals, double tolerance = kShellTolerance,
                         double b0_threshold = kB0Threshold);

class GradientScheme {
 public:
  /// Vectors are normalized; zero vectors are only allowed for b0 entries.
  GradientScheme(std::vector<Eigen::Vector3d> vectors, std::vector<double> bvals,
                 double tolerance = kShellTolerance);

  std::size_t size() const noexcept { return bvals_.size(); }
  std::span<const double> bvals() const noexcept { return bvals_; }
  std::span<const Eigen::Vector3d> vectors() const noexcept { return vectors_; }
  const ShellTable& shells() const noexcept { return shells_; }

  /// Directions of the members of `shell`, acquisition order.
  std::vector<Direction> directions(const Shell& shell) const;

 private:
  std::vector<Eigen::Vector3d> vectors_;
  std::vector<double> bvals_;
  ShellTable shells_;
};

/// Parses bvals/bvecs text. Errors are ParseError with line/column for bad
/// tokens and counts for length mismatches.
GradientScheme parse_bvals_bvecs(std::string_view bvals_text, std::string_view bvecs_text,
                                 double tolerance = kShellTolerance);

GradientScheme read_bvals_bvecs(const std::filesystem::path& bvals,
                                const std::filesystem::path& bvecs,
                                double tolerance = kShellTolerance);

void write_bvals_bvecs(const std::filesystem::path& bvals, const std::filesystem::path& bvecs,
                       const GradientScheme& scheme);

/// Whitespace text with one "x y z" direction per line.
std::vector<Direction> read_directions(const std::filesystem::path& path);
std::vector<Direction> parse_directions(std::string_view text);
void write_directions(const std::filesystem::path& path, std::span<const Direction> dirs);

/// Diffusion-weighted volumes of the requested shells, each shell a
/// contiguous channel block in acquisition order. All shells must have the
/// same member count.
DwiVolume gather_shells(const NormalizedDwi& dwi, std::span<const Shell* const> shells);

}  // namespace sphconv
