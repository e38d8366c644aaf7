#pragma once

// Batched-operator transforms against a naive per-voxel solver that rebuilds
// the basis and solves the penalized normal equations for every voxel.

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sphconv/sh_basis.hpp"
#include "sphconv/volume.hpp"

namespace sphconv {

/// Per voxel: B from `gradients`, then solve (B^T B + lambda LB) c = B^T s by
/// Cholesky. Raises the same IllPosedFit as FitOperator.
ShVolume naive_signal_to_sh(const DwiVolume& vol, std::span<const Direction> gradients,
                            int order, double lambda);

/// Per voxel: evaluate the basis at `gradients` and sum coefficient-weighted
/// basis values.
DwiVolume naive_sh_to_signal(const ShVolume& sh, std::span<const Direction> gradients);

struct BenchRow {
  std::string direction;  // "signal2sh" or "sh2signal"
  int order = 0;
  std::size_t voxels = 0;
  std::string method;  // "batched", "naive" or "batched_parallel"
  double seconds = 0.0;
  double max_dev = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  /// Header "direction,order,voxels,method,seconds,max_dev", one line per row.
  void write_csv(std::ostream& os) const;
  const BenchRow* find(const std::string& direction, int order, std::size_t voxels,
                       const std::string& method) const;
};

struct BenchOptions {
  std::vector<int> orders{2, 4, 6, 8};
  std::size_t voxel_count = 450000;
  int repeats = 3;
  std::uint64_t seed = 1;
  /// Size of the shipped direction set used for sampling (30, 60 or 90).
  std::size_t directions = 90;
  double lambda = 0.006;
  /// > 1 adds "batched_parallel" rows run with this many workers.
  int threads = 1;
};

/// Median wall time over `repeats` runs per (direction, order, method), after
/// one untimed batched run; batched and naive runs alternate. The batched
/// timing includes building the operator; synthetic data generation is
/// excluded. Throws InvalidArgument when repeats < 3.
BenchReport run_bench(const BenchOptions& options);

}  // namespace sphconv
