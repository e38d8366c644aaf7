#pragma once

#include <cstddef>
#include <functional>

#include <Eigen/Core>

#include "sphconv/exec.hpp"
#include "sphconv/linalg.hpp"

namespace sphconv::detail {

using sphconv::RowMatrix;

inline constexpr std::size_t kVoxelChunk = 256;

/// Calls fn(begin, end) over [0, count) in kVoxelChunk-sized pieces, spread
/// across policy.threads workers.
void for_each_chunk(std::size_t count, const ExecPolicy& policy,
                    const std::function<void(std::size_t, std::size_t)>& fn);

/// out = op * in for a batch of voxels stored as rows: `in` is op.cols() rows
/// of `voxels` values (row stride in_stride), `out` is op.rows() rows (row
/// stride out_stride). Each output element is accumulated in the same order
/// regardless of batch size or chunking.
void apply_operator(const RowMatrix& op, const double* in, std::size_t in_stride, double* out,
                    std::size_t out_stride, std::size_t voxels, const ExecPolicy& policy);

/// Same as apply_operator restricted to voxels [begin, end).
void apply_operator_range(const RowMatrix& op, const double* in, std::size_t in_stride,
                          double* out, std::size_t out_stride, std::size_t begin,
                          std::size_t end);

}  // namespace sphconv::detail
