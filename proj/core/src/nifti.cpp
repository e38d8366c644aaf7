#include "sphconv/nifti.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include <zlib.h>

#include "sphconv/error.hpp"

namespace sphconv {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;  // header + 4-byte extension flag

// Field offsets in the 348-byte NIfTI-1 header.
namespace off {
constexpr std::size_t sizeof_hdr = 0;
constexpr std::size_t dim = 40;
constexpr std::size_t datatype = 70;
constexpr std::size_t bitpix = 72;
constexpr std::size_t pixdim = 76;
constexpr std::size_t vox_offset = 108;
constexpr std::size_t scl_slope = 112;
constexpr std::size_t scl_inter = 116;
constexpr std::size_t xyzt_units = 123;
constexpr std::size_t qform_code = 252;
constexpr std::size_t sform_code = 254;
constexpr std::size_t quatern_b = 256;
constexpr std::size_t qoffset_x = 268;
constexpr std::size_t srow_x = 280;
constexpr std::size_t magic = 344;
}  // namespace off

std::size_t datatype_size(std::int16_t code) {
  switch (static_cast<NiftiDatatype>(code)) {
    case NiftiDatatype::UInt8: return 1;
    case NiftiDatatype::Int16: return 2;
    case NiftiDatatype::Int32: return 4;
    case NiftiDatatype::Float32: return 4;
    case NiftiDatatype::Float64: return 8;
  }
  return 0;
}

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(std::size_t pos) const {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos, sizeof(T));
    if (swap_) std::reverse(raw, raw + sizeof(T));
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }

 private:
  const std::vector<unsigned char>& bytes_;
  bool swap_;
};

template <typename T>
void put(std::vector<unsigned char>& bytes, std::size_t pos, T value) {
  static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
  std::memcpy(bytes.data() + pos, &value, sizeof(T));
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw NiftiError(NiftiError::Kind::Io, "cannot open " + path.string());
  std::vector<unsigned char> bytes;
  unsigned char buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof(buf));
    if (n < 0) {
      int errnum = 0;
      const std::string msg = gzerror(f, &errnum);
      gzclose(f);
      // A gzip stream cut short reports as a read error.
      throw NiftiError(NiftiError::Kind::Truncated, "cannot read " + path.string() + ": " + msg);
    }
    if (n == 0) break;
    bytes.insert(bytes.end(), buf, buf + n);
  }
  gzclose(f);
  return bytes;
}

Eigen::Matrix4d qform_affine(const ByteReader& h) {
  const double b = h.get<float>(off::quatern_b);
  const double c = h.get<float>(off::quatern_b + 4);
  const double d = h.get<float>(off::quatern_b + 8);
  const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
  double qfac = h.get<float>(off::pixdim);
  if (qfac == 0.0) qfac = 1.0;
  const double dx = h.get<float>(off::pixdim + 4);
  const double dy = h.get<float>(off::pixdim + 8);
  const double dz = h.get<float>(off::pixdim + 12) * qfac;

  Eigen::Matrix3d r;
  r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
      2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
      2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 1>(0, 0) = r.col(0) * dx;
  m.block<3, 1>(0, 1) = r.col(1) * dy;
  m.block<3, 1>(0, 2) = r.col(2) * dz;
  for (int i = 0; i < 3; ++i) m(i, 3) = h.get<float>(off::qoffset_x + 4 * static_cast<std::size_t>(i));
  return m;
}

}  // namespace

NiftiImage read_nifti(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = slurp(path);
  if (bytes.size() < kHeaderSize)
    throw NiftiError(NiftiError::Kind::Truncated,
                     path.string() + ": " + std::to_string(bytes.size()) +
                         " bytes is shorter than a NIfTI-1 header");

  bool swap = false;
  {
    const ByteReader le(bytes, false);
    const ByteReader be(bytes, true);
    if (le.get<std::int32_t>(off::sizeof_hdr) == 348)
      swap = std::endian::native != std::endian::little;
    else if (be.get<std::int32_t>(off::sizeof_hdr) == 348)
      swap = std::endian::native == std::endian::little;
    else
      throw NiftiError(NiftiError::Kind::BadMagic, path.string() + ": sizeof_hdr is not 348");
  }
  const ByteReader h(bytes, swap);

  if (std::memcmp(bytes.data() + off::magic, "n+1\0", 4) != 0) {
    if (std::memcmp(bytes.data() + off::magic, "ni1\0", 4) == 0)
      throw NiftiError(NiftiError::Kind::BadMagic,
                       path.string() + ": paired .hdr/.img NIfTI is not supported");
    throw NiftiError(NiftiError::Kind::BadMagic, path.string() + ": bad NIfTI-1 magic");
  }

  const auto ndim = h.get<std::int16_t>(off::dim);
  if (ndim < 1 || ndim > 7)
    throw NiftiError(NiftiError::Kind::Malformed, path.string() + ": dim[0] out of range");
  std::array<std::size_t, 4> dims{1, 1, 1, 1};
  for (int i = 1; i <= ndim; ++i) {
    const auto d = h.get<std::int16_t>(off::dim + 2 * static_cast<std::size_t>(i));
    if (d < 1)
      throw NiftiError(NiftiError::Kind::Malformed,
                       path.string() + ": dim[" + std::to_string(i) + "] is not positive");
    if (i <= 4)
      dims[static_cast<std::size_t>(i - 1)] = static_cast<std::size_t>(d);
    else if (d != 1)
      throw NiftiError(NiftiError::Kind::Malformed,
                       path.string() + ": more than 4 non-trivial dimensions");
  }

  const auto code = h.get<std::int16_t>(off::datatype);
  const std::size_t bpv = datatype_size(code);
  if (bpv == 0)
    throw NiftiError(NiftiError::Kind::UnsupportedDatatype,
                     path.string() + ": unsupported datatype code " + std::to_string(code));

  const double vox_offset = h.get<float>(off::vox_offset);
  if (!(vox_offset >= static_cast<double>(kHeaderSize)))
    throw NiftiError(NiftiError::Kind::Malformed, path.string() + ": vox_offset below 348");
  const auto start = static_cast<std::size_t>(vox_offset);

  NiftiImage img;
  img.data = Array4(dims);
  img.datatype = static_cast<NiftiDatatype>(code);
  img.big_endian = (std::endian::native == std::endian::little) == swap;
  const std::size_t count = img.data.values.size();
  if (bytes.size() < start + count * bpv)
    throw NiftiError(NiftiError::Kind::Truncated,
                     path.string() + ": expected " + std::to_string(count * bpv) +
                         " data bytes, file has " +
                         std::to_string(bytes.size() > start ? bytes.size() - start : 0));

  double slope = h.get<float>(off::scl_slope);
  double inter = h.get<float>(off::scl_inter);
  if (slope == 0.0 || !std::isfinite(slope)) {
    slope = 1.0;
    inter = 0.0;
  }
  if (!std::isfinite(inter)) inter = 0.0;

  auto fill = [&](auto tag) {
    using T = decltype(tag);
    for (std::size_t i = 0; i < count; ++i)
      img.data.values[i] = static_cast<double>(h.get<T>(start + i * sizeof(T))) * slope + inter;
  };
  switch (img.datatype) {
    case NiftiDatatype::UInt8: fill(std::uint8_t{}); break;
    case NiftiDatatype::Int16: fill(std::int16_t{}); break;
    case NiftiDatatype::Int32: fill(std::int32_t{}); break;
    case NiftiDatatype::Float32: fill(float{}); break;
    case NiftiDatatype::Float64: fill(double{}); break;
  }

  if (h.get<std::int16_t>(off::sform_code) > 0) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c)
        img.affine(r, c) = h.get<float>(off::srow_x + 16 * static_cast<std::size_t>(r) + 4 * static_cast<std::size_t>(c));
  } else if (h.get<std::int16_t>(off::qform_code) > 0) {
    img.affine = qform_affine(h);
  } else {
    for (int i = 0; i < 3; ++i) {
      const double p = h.get<float>(off::pixdim + 4 * static_cast<std::size_t>(i + 1));
      img.affine(i, i) = p == 0.0 ? 1.0 : p;
    }
  }
  return img;
}

namespace {

template <typename T>
void encode(std::vector<unsigned char>& bytes, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    double v = values[i];
    if constexpr (std::is_integral_v<T>) {
      v = std::round(v);
      if (!(v >= static_cast<double>(std::numeric_limits<T>::min()) &&
            v <= static_cast<double>(std::numeric_limits<T>::max())))
        throw InvalidArgument("value " + std::to_string(values[i]) +
                              " does not fit the requested NIfTI integer datatype");
    }
    put(bytes, kDataOffset + i * sizeof(T), static_cast<T>(v));
  }
}

bool ends_with_gz(const std::filesystem::path& path) {
  const std::string s = path.string();
  return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

}  // namespace

void write_nifti(const std::filesystem::path& path, const Array4& data,
                 const Eigen::Matrix4d& affine, const NiftiWriteOptions& options) {
  for (std::size_t d : data.dims)
    if (d < 1 || d > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max()))
      throw InvalidArgument("NIfTI-1 dimensions must lie in [1, 32767]");

  const auto code = static_cast<std::int16_t>(options.datatype);
  const std::size_t bpv = datatype_size(code);
  std::vector<unsigned char> bytes(kDataOffset + data.values.size() * bpv, 0);

  put<std::int32_t>(bytes, off::sizeof_hdr, 348);
  const std::int16_t ndim = data.dims[3] > 1 ? 4 : 3;
  put<std::int16_t>(bytes, off::dim, ndim);
  for (std::size_t i = 0; i < 4; ++i)
    put<std::int16_t>(bytes, off::dim + 2 * (i + 1), static_cast<std::int16_t>(data.dims[i]));
  for (std::size_t i = 5; i < 8; ++i) put<std::int16_t>(bytes, off::dim + 2 * i, 1);
  put<std::int16_t>(bytes, off::datatype, code);
  put<std::int16_t>(bytes, off::bitpix, static_cast<std::int16_t>(8 * bpv));

  put<float>(bytes, off::pixdim, 1.0f);
  for (int i = 0; i < 3; ++i)
    put<float>(bytes, off::pixdim + 4 * static_cast<std::size_t>(i + 1),
               static_cast<float>(affine.block<3, 1>(0, i).norm()));
  put<float>(bytes, off::pixdim + 16, 1.0f);
  put<float>(bytes, off::vox_offset, static_cast<float>(kDataOffset));
  put<float>(bytes, off::scl_slope, 1.0f);
  put<float>(bytes, off::scl_inter, 0.0f);
  bytes[off::xyzt_units] = 2 | 8;  // mm, s
  put<std::int16_t>(bytes, off::qform_code, 0);
  put<std::int16_t>(bytes, off::sform_code, 1);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      put<float>(bytes, off::srow_x + 16 * static_cast<std::size_t>(r) + 4 * static_cast<std::size_t>(c),
                 static_cast<float>(affine(r, c)));
  std::memcpy(bytes.data() + off::magic, "n+1\0", 4);

  switch (options.datatype) {
    case NiftiDatatype::UInt8: encode<std::uint8_t>(bytes, data.values); break;
    case NiftiDatatype::Int16: encode<std::int16_t>(bytes, data.values); break;
    case NiftiDatatype::Int32: encode<std::int32_t>(bytes, data.values); break;
    case NiftiDatatype::Float32: encode<float>(bytes, data.values); break;
    case NiftiDatatype::Float64: encode<double>(bytes, data.values); break;
  }

  if (options.gzip.value_or(ends_with_gz(path))) {
    gzFile f = gzopen(path.string().c_str(), "wb6");
    if (!f) throw NiftiError(NiftiError::Kind::Io, "cannot open " + path.string() + " for writing");
    std::size_t done = 0;
    while (done < bytes.size()) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
      if (gzwrite(f, bytes.data() + done, chunk) != static_cast<int>(chunk)) {
        gzclose(f);
        throw NiftiError(NiftiError::Kind::Io, "cannot write " + path.string());
      }
      done += chunk;
    }
    if (gzclose(f) != Z_OK) throw NiftiError(NiftiError::Kind::Io, "cannot write " + path.string());
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NiftiError(NiftiError::Kind::Io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw NiftiError(NiftiError::Kind::Io, "cannot write " + path.string());
  }
}

}  // namespace sphconv
