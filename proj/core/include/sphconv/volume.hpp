#pragma once

// Dense volume containers. Within one channel the spatial block is stored
// with x fastest, then y, then z (NIfTI order), so a 4D acquisition maps onto
// a single-subject 5D volume without reordering.

#include <array>
#include <cstddef>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sphconv/sh_basis.hpp"

namespace sphconv {

struct Shape5 {
  std::size_t subjects = 0;
  std::size_t channels = 0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t spatial() const noexcept { return nx * ny * nz; }
  std::size_t size() const noexcept { return subjects * channels * spatial(); }
  std::string str() const;

  friend bool operator==(const Shape5&, const Shape5&) = default;
};

namespace detail {

/// Leaves elements uninitialized on value-less construction.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <typename U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

}  // namespace detail

/// Channel-first 5D array: subjects x channels x X x Y x Z.
class Volume5 {
 public:
  Volume5() = default;
  explicit Volume5(const Shape5& shape, double fill = 0.0);

  /// Storage with unspecified contents, for outputs that are fully overwritten.
  static Volume5 uninitialized(const Shape5& shape);

  const Shape5& shape() const noexcept { return shape_; }

  double& at(std::size_t s, std::size_t c, std::size_t x, std::size_t y, std::size_t z) {
    return data_[offset(s, c) + (z * shape_.ny + y) * shape_.nx + x];
  }
  double at(std::size_t s, std::size_t c, std::size_t x, std::size_t y, std::size_t z) const {
    return data_[offset(s, c) + (z * shape_.ny + y) * shape_.nx + x];
  }

  /// Contiguous spatial block of one channel.
  std::span<double> channel(std::size_t s, std::size_t c) {
    return {data_.data() + offset(s, c), shape_.spatial()};
  }
  std::span<const double> channel(std::size_t s, std::size_t c) const {
    return {data_.data() + offset(s, c), shape_.spatial()};
  }

  /// Channels [first, first + count) of subject s as one row-major
  /// (count x spatial) block.
  double* channels(std::size_t s, std::size_t first) { return data_.data() + offset(s, first); }
  const double* channels(std::size_t s, std::size_t first) const {
    return data_.data() + offset(s, first);
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

 private:
  std::size_t offset(std::size_t s, std::size_t c) const noexcept {
    return (s * shape_.channels + c) * shape_.spatial();
  }

  Shape5 shape_;
  std::vector<double, detail::DefaultInitAllocator<double>> data_;
};

/// 4D acquisition array in NIfTI order: x fastest, volume index slowest.
struct Array4 {
  std::array<std::size_t, 4> dims{0, 0, 0, 0};
  std::vector<double> values;

  Array4() = default;
  Array4(std::array<std::size_t, 4> d, double fill = 0.0);

  std::size_t spatial() const noexcept { return dims[0] * dims[1] * dims[2]; }
  std::size_t volumes() const noexcept { return dims[3]; }

  std::span<double> volume(std::size_t t) { return {values.data() + t * spatial(), spatial()}; }
  std::span<const double> volume(std::size_t t) const {
    return {values.data() + t * spatial(), spatial()};
  }
};

/// SH coefficients, `shells` blocks of R channels each.
struct ShVolume {
  Volume5 data;
  ShBasisSpec basis{0};
  std::size_t shells = 1;

  ShVolume() = default;
  ShVolume(Volume5 d, ShBasisSpec b, std::size_t s);
};

/// Normalized diffusion signal, `shells` equal blocks of samples per voxel.
struct DwiVolume {
  Volume5 data;
  std::size_t shells = 1;

  DwiVolume() = default;
  DwiVolume(Volume5 d, std::size_t s);

  std::size_t samples_per_shell() const noexcept { return data.shape().channels / shells; }
};

/// Single-subject 5D view of a 4D array (copy).
Volume5 to_volume5(const Array4& a);
/// Inverse of to_volume5 for one subject.
Array4 to_array4(const Volume5& v, std::size_t subject = 0);

}  // namespace sphconv
