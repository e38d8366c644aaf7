#pragma once

namespace sphconv {

/// Worker count for voxel-parallel loops. Results never depend on it: voxels
/// are processed in fixed-size chunks whatever the thread count.
struct ExecPolicy {
  int threads = 1;
};

}  // namespace sphconv
