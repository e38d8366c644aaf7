#pragma once

// Single-file NIfTI-1 (.nii, .nii.gz). Data is returned in double precision,
// x fastest, with scl_slope / scl_inter applied.

#include <cstdint>
#include <filesystem>
#include <optional>

#include <Eigen/Core>

#include "sphconv/volume.hpp"

namespace sphconv {

enum class NiftiDatatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
};

struct NiftiImage {
  Array4 data;
  /// Voxel to world; sform if present, else qform, else pixdim scaling.
  Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();
  NiftiDatatype datatype = NiftiDatatype::Float32;
  bool big_endian = false;
};

/// Throws NiftiError with kind Io, BadMagic, UnsupportedDatatype, Truncated or
/// Malformed.
NiftiImage read_nifti(const std::filesystem::path& path);

struct NiftiWriteOptions {
  NiftiDatatype datatype = NiftiDatatype::Float32;
  /// Defaults to true for paths ending in ".gz".
  std::optional<bool> gzip;
};

/// Writes a little-endian NIfTI-1 file with an sform (code 1) taken from
/// `affine`. Integer datatypes round and throw InvalidArgument on overflow.
/// Concurrent writers to one path are not synchronized.
void write_nifti(const std::filesystem::path& path, const Array4& data,
                 const Eigen::Matrix4d& affine = Eigen::Matrix4d::Identity(),
                 const NiftiWriteOptions& options = {});

}  // namespace sphconv
