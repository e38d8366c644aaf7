#pragma once

// Synthetic diffusion acquisitions for desk-scale testing without clinical
// data.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "sphconv/gradient_table.hpp"
#include "sphconv/sh_basis.hpp"
#include "sphconv/volume.hpp"

namespace sphconv {

/// Electrostatic-repulsion direction set with 30, 60 or 90 antipodally
/// symmetric directions. Throws InvalidArgument for other counts.
std::vector<Direction> repulsion_directions(std::size_t count);

/// True if every shipped direction set gives a full-column-rank basis for
/// every even order <= 8 whose coefficient count does not exceed the set size.
bool verify_direction_sets();

struct ConstantSignal {
  double value = 1.0;
};

/// Random even-order SH signal, positive by construction: c0 sets the mean
/// and the higher degrees are scaled so their sum never exceeds `contrast`
/// times the mean in magnitude.
struct BandLimitedSignal {
  int order = 4;
  std::uint64_t seed = 1;
  double mean = 1.0;
  double contrast = 0.5;
};

/// Single-tensor attenuation exp(-b g^T D g); D in mm^2/s, b in s/mm^2.
struct TensorSignal {
  Eigen::Matrix3d diffusivity = Eigen::Vector3d(1.7e-3, 0.3e-3, 0.3e-3).asDiagonal();
};

using PhantomGenerator = std::variant<ConstantSignal, BandLimitedSignal, TensorSignal>;

struct PhantomSpec {
  std::array<std::size_t, 3> dims{4, 4, 4};
  PhantomGenerator generator = ConstantSignal{};
  /// Unattenuated signal written to the b0 volumes.
  double b0_signal = 1000.0;
  /// Optional i.i.d. Gaussian noise sigma applied to the raw values.
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 7;
};

/// Acquisition layout: `b0_count` b0 volumes followed by one block per
/// b-value, each using `directions`.
GradientScheme make_scheme(std::span<const Direction> directions, std::span<const double> bvalues,
                           std::size_t b0_count = 1);

struct Phantom {
  Array4 raw;
  GradientScheme scheme;
  /// Band-limited phantoms only: true coefficients, one shell block per
  /// diffusion shell.
  std::optional<ShVolume> truth;
};

Phantom make_phantom(const PhantomSpec& spec, const GradientScheme& scheme);

/// Attenuation of one voxel of `generator` along `g` on a shell of b-value
/// `b` (shell index selects the band-limited draw for multi-shell data).
double phantom_attenuation(const PhantomGenerator& generator, const Direction& g, double b,
                           std::size_t shell, std::size_t voxel);

/// Writes <prefix>.nii.gz, <prefix>.bvals, <prefix>.bvecs and, when present,
/// <prefix>_sh_true.nii.gz (float64).
void write_phantom(const Phantom& phantom, const std::filesystem::path& prefix);

}  // namespace sphconv
