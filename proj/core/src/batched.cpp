#include "batched.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace sphconv::detail {

void for_each_chunk(std::size_t count, const ExecPolicy& policy,
                    const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t chunks = (count + kVoxelChunk - 1) / kVoxelChunk;
  const auto workers =
      static_cast<std::size_t>(std::clamp<long>(policy.threads, 1, static_cast<long>(std::max<std::size_t>(chunks, 1))));

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * kVoxelChunk;
    fn(begin, std::min(count, begin + kVoxelChunk));
  };

  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) run_chunk(c);
    });
  }
}

void apply_operator_range(const RowMatrix& op, const double* in, std::size_t in_stride,
                          double* out, std::size_t out_stride, std::size_t begin,
                          std::size_t end) {
  const Eigen::Index rows = op.rows();
  const Eigen::Index cols = op.cols();
  const std::size_t width = end - begin;
  for (Eigen::Index r = 0; r < rows; ++r) {
    double* o = out + static_cast<std::size_t>(r) * out_stride + begin;
    if (cols == 0) {
      std::fill(o, o + width, 0.0);
      continue;
    }
    const double w0 = op(r, 0);
    const double* src = in + begin;
    for (std::size_t v = 0; v < width; ++v) o[v] = w0 * src[v];
    for (Eigen::Index n = 1; n < cols; ++n) {
      const double w = op(r, n);
      src = in + static_cast<std::size_t>(n) * in_stride + begin;
      for (std::size_t v = 0; v < width; ++v) o[v] += w * src[v];
    }
  }
}

void apply_operator(const RowMatrix& op, const double* in, std::size_t in_stride, double* out,
                    std::size_t out_stride, std::size_t voxels, const ExecPolicy& policy) {
  for_each_chunk(voxels, policy, [&](std::size_t begin, std::size_t end) {
    apply_operator_range(op, in, in_stride, out, out_stride, begin, end);
  });
}

}  // namespace sphconv::detail
