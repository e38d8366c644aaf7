#include "sphconv/phantom.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/SVD>

#include "sphconv/error.hpp"
#include "sphconv/nifti.hpp"

namespace sphconv {

namespace {

#include "direction_tables.inc"

template <std::size_t N>
std::vector<Direction> to_directions(const std::array<std::array<double, 3>, N>& table) {
  std::vector<Direction> dirs;
  dirs.reserve(N);
  for (const auto& d : table) dirs.emplace_back(d[0], d[1], d[2]);
  return dirs;
}

/// Portable uniform draw in [-1, 1).
double symmetric_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-52 - 1.0;
}

std::mt19937_64 voxel_engine(std::uint64_t seed, std::size_t shell, std::size_t voxel) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(shell), static_cast<std::uint32_t>(voxel),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(voxel) >> 32)};
  return std::mt19937_64(seq);
}

Eigen::VectorXd band_limited_coefficients(const BandLimitedSignal& g, std::size_t shell,
                                          std::size_t voxel) {
  const std::size_t r = coeff_count(g.order);
  Eigen::VectorXd c(static_cast<Eigen::Index>(r));
  auto gen = voxel_engine(g.seed, shell, voxel);
  for (Eigen::Index j = 0; j < c.size(); ++j) c(j) = symmetric_uniform(gen);

  // |sum_l f_l(u)| <= sum_l ||c_l|| sqrt((2l+1)/4pi) by Cauchy-Schwarz and the
  // addition theorem.
  double bound = 0.0;
  for (int l = 2; l <= g.order; l += 2) {
    const auto first = static_cast<Eigen::Index>(sh_index(l, -l));
    bound += c.segment(first, 2 * l + 1).norm() * std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi));
  }
  if (bound > 0.0) c *= g.contrast * g.mean / bound;
  c(0) = 2.0 * std::sqrt(std::numbers::pi) * g.mean;
  return c;
}

}  // namespace

std::vector<Direction> repulsion_directions(std::size_t count) {
  switch (count) {
    case 30: return to_directions(kDirections30);
    case 60: return to_directions(kDirections60);
    case 90: return to_directions(kDirections90);
    default:
      throw InvalidArgument("no shipped direction set with " + std::to_string(count) +
                            " directions (available: 30, 60, 90)");
  }
}

bool verify_direction_sets() {
  for (std::size_t count : {30u, 60u, 90u}) {
    const auto dirs = repulsion_directions(count);
    for (int order = 0; order <= 8; order += 2) {
      const std::size_t r = coeff_count(order);
      if (r > count) break;
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(eval_basis(dirs, order));
      const auto& sv = svd.singularValues();
      if (!(sv.minCoeff() > 1e-8 * sv.maxCoeff())) return false;
    }
  }
  return true;
}

GradientScheme make_scheme(std::span<const Direction> directions, std::span<const double> bvalues,
                           std::size_t b0_count) {
  std::vector<Eigen::Vector3d> vecs(b0_count, Eigen::Vector3d::Zero());
  std::vector<double> bvals(b0_count, 0.0);
  for (double b : bvalues)
    for (const Direction& d : directions) {
      vecs.push_back(d.vec());
      bvals.push_back(b);
    }
  return GradientScheme(std::move(vecs), std::move(bvals));
}

double phantom_attenuation(const PhantomGenerator& generator, const Direction& g, double b,
                           std::size_t shell, std::size_t voxel) {
  return std::visit(
      [&](const auto& gen) -> double {
        using T = std::decay_t<decltype(gen)>;
        if constexpr (std::is_same_v<T, ConstantSignal>) {
          return gen.value;
        } else if constexpr (std::is_same_v<T, TensorSignal>) {
          return std::exp(-b * g.vec().dot(gen.diffusivity * g.vec()));
        } else {
          const Eigen::VectorXd c = band_limited_coefficients(gen, shell, voxel);
          Eigen::VectorXd row(c.size());
          eval_basis_row(g, gen.order, std::span<double>(row.data(), static_cast<std::size_t>(row.size())));
          return row.dot(c);
        }
      },
      generator);
}

Phantom make_phantom(const PhantomSpec& spec, const GradientScheme& scheme) {
  const auto& table = scheme.shells();
  if (table.b0.empty()) throw InvalidArgument("phantom scheme needs at least one b0 volume");

  Phantom ph{Array4({spec.dims[0], spec.dims[1], spec.dims[2], scheme.size()}), scheme, std::nullopt};
  const std::size_t spatial = ph.raw.spatial();

  for (std::size_t t : table.b0) std::fill(ph.raw.volume(t).begin(), ph.raw.volume(t).end(), spec.b0_signal);

  const auto* band = std::get_if<BandLimitedSignal>(&spec.generator);
  if (band) {
    const ShBasisSpec basis(band->order);
    const std::size_t r = basis.coeff_count();
    Volume5 truth(Shape5{1, table.shells.size() * r, spec.dims[0], spec.dims[1], spec.dims[2]});
    for (std::size_t s = 0; s < table.shells.size(); ++s) {
      const Eigen::MatrixXd b = eval_basis(scheme.directions(table.shells[s]), band->order);
      for (std::size_t v = 0; v < spatial; ++v) {
        const Eigen::VectorXd c = band_limited_coefficients(*band, s, v);
        for (std::size_t j = 0; j < r; ++j) truth.channel(0, s * r + j)[v] = c(static_cast<Eigen::Index>(j));
        const Eigen::VectorXd sig = b * c;
        for (std::size_t i = 0; i < table.shells[s].members.size(); ++i)
          ph.raw.volume(table.shells[s].members[i])[v] = spec.b0_signal * sig(static_cast<Eigen::Index>(i));
      }
    }
    ph.truth = ShVolume(std::move(truth), basis, table.shells.size());
  } else {
    for (std::size_t s = 0; s < table.shells.size(); ++s)
      for (std::size_t t : table.shells[s].members) {
        const Direction g(scheme.vectors()[t]);
        const double b = scheme.bvals()[t];
        auto vol = ph.raw.volume(t);
        for (std::size_t v = 0; v < spatial; ++v)
          vol[v] = spec.b0_signal * phantom_attenuation(spec.generator, g, b, s, v);
      }
  }

  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 gen(spec.noise_seed);
    for (double& x : ph.raw.values) {
      // Box-Muller on the portable uniform draw.
      const double u1 = 0.5 * (symmetric_uniform(gen) + 1.0);
      const double u2 = 0.5 * (symmetric_uniform(gen) + 1.0);
      x += spec.noise_sigma * std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
  }
  return ph;
}

void write_phantom(const Phantom& phantom, const std::filesystem::path& prefix) {
  const std::string base = prefix.string();
  write_nifti(base + ".nii.gz", phantom.raw, Eigen::Matrix4d::Identity(),
              {.datatype = NiftiDatatype::Float64, .gzip = true});
  write_bvals_bvecs(base + ".bvals", base + ".bvecs", phantom.scheme);
  if (phantom.truth)
    write_nifti(base + "_sh_true.nii.gz", to_array4(phantom.truth->data), Eigen::Matrix4d::Identity(),
                {.datatype = NiftiDatatype::Float64, .gzip = true});
}

}  // namespace sphconv
