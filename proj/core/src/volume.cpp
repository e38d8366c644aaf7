#include "sphconv/volume.hpp"

#include <algorithm>
#include <sstream>

#include "sphconv/error.hpp"

namespace sphconv {

std::string Shape5::str() const {
  std::ostringstream os;
  os << "(" << subjects << ", " << channels << ", " << nx << ", " << ny << ", " << nz << ")";
  return os.str();
}

Volume5::Volume5(const Shape5& shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Volume5 Volume5::uninitialized(const Shape5& shape) {
  Volume5 v;
  v.shape_ = shape;
  v.data_.resize(shape.size());
  return v;
}

Array4::Array4(std::array<std::size_t, 4> d, double fill)
    : dims(d), values(d[0] * d[1] * d[2] * d[3], fill) {}

ShVolume::ShVolume(Volume5 d, ShBasisSpec b, std::size_t s)
    : data(std::move(d)), basis(b), shells(s) {
  if (shells == 0 || data.shape().channels != shells * basis.coeff_count())
    throw ShapeError("SH volume with " + std::to_string(data.shape().channels) +
                     " channels does not hold " + std::to_string(shells) + " shell(s) of " +
                     std::to_string(basis.coeff_count()) + " coefficients");
}

DwiVolume::DwiVolume(Volume5 d, std::size_t s) : data(std::move(d)), shells(s) {
  if (shells == 0 || data.shape().channels % shells != 0)
    throw ShapeError("DWI volume with " + std::to_string(data.shape().channels) +
                     " channels cannot be split into " + std::to_string(shells) + " equal shells");
}

Volume5 to_volume5(const Array4& a) {
  Volume5 v(Shape5{1, a.dims[3], a.dims[0], a.dims[1], a.dims[2]});
  std::copy(a.values.begin(), a.values.end(), v.data().begin());
  return v;
}

Array4 to_array4(const Volume5& v, std::size_t subject) {
  const Shape5& s = v.shape();
  if (subject >= s.subjects)
    throw ShapeError("subject " + std::to_string(subject) + " out of range for " + s.str());
  Array4 a({s.nx, s.ny, s.nz, s.channels});
  const double* src = v.channels(subject, 0);
  std::copy(src, src + a.values.size(), a.values.begin());
  return a;
}

}  // namespace sphconv
