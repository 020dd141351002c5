#include "golfsig/io/gsmb.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "golfsig/util/error.hpp"

namespace golfsig::io {

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return v;
}

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::f32: return 4;
    case DType::u16: return 2;
    case DType::f64: return 8;
  }
  return 0;
}

}  // namespace

std::vector<std::uint8_t> encode_gsmb(const GsmbArray& array) {
  const std::size_t n = nn::shape_size(array.shape);
  const bool is_int = array.dtype == DType::u16;
  if ((is_int ? array.ints.size() : array.real.size()) != n) {
    throw DimensionError("GSMB encode: payload size does not match shape " + nn::shape_string(array.shape));
  }
  if (array.shape.size() > 255) throw DimensionError("GSMB encode: more than 255 axes");
  std::vector<std::uint8_t> out{'G', 'S', 'M', 'B'};
  out.reserve(8 + 4 * array.shape.size() + n * dtype_size(array.dtype));
  out.push_back(kGsmbVersion);
  out.push_back(static_cast<std::uint8_t>(array.dtype));
  out.push_back(static_cast<std::uint8_t>(array.shape.size()));
  out.push_back(0);
  for (auto d : array.shape) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  switch (array.dtype) {
    case DType::f32:
      for (double v : array.real) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      break;
    case DType::f64:
      for (double v : array.real) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
      break;
    case DType::u16:
      for (auto v : array.ints) put_le<std::uint16_t>(out, v);
      break;
  }
  return out;
}

GsmbArray decode_gsmb(std::span<const std::uint8_t> bytes, const std::string& name) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "GSMB", 4) != 0) {
    throw FormatError(name + ": bad magic (not a GSMB file)");
  }
  if (bytes[4] != kGsmbVersion) {
    throw FormatError(name + ": unsupported GSMB version " + std::to_string(bytes[4]));
  }
  if (bytes[5] > 2) throw FormatError(name + ": unknown dtype code " + std::to_string(bytes[5]));
  GsmbArray a;
  a.dtype = static_cast<DType>(bytes[5]);
  const std::size_t ndim = bytes[6];
  if (bytes.size() < 8 + 4 * ndim) throw FormatError(name + ": truncated header");
  for (std::size_t i = 0; i < ndim; ++i) a.shape.push_back(get_le<std::uint32_t>(bytes.data() + 8 + 4 * i));
  const std::size_t n = nn::shape_size(a.shape);
  const std::size_t offset = 8 + 4 * ndim;
  const std::size_t need = n * dtype_size(a.dtype);
  if (bytes.size() - offset != need) {
    throw FormatError(name + ": payload holds " + std::to_string(bytes.size() - offset) + " bytes, shape " +
                      nn::shape_string(a.shape) + " needs " + std::to_string(need));
  }
  const std::uint8_t* p = bytes.data() + offset;
  switch (a.dtype) {
    case DType::f32:
      a.real.resize(n);
      for (std::size_t i = 0; i < n; ++i) a.real[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
      break;
    case DType::f64:
      a.real.resize(n);
      for (std::size_t i = 0; i < n; ++i) a.real[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
      break;
    case DType::u16:
      a.ints.resize(n);
      for (std::size_t i = 0; i < n; ++i) a.ints[i] = get_le<std::uint16_t>(p + 2 * i);
      break;
  }
  return a;
}

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError(path.string() + ": cannot open for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError(path.string() + ": write failed");
}

}  // namespace

void write_gsmb(const std::filesystem::path& path, const nn::NDArray& array, DType dtype) {
  if (dtype == DType::u16) throw FormatError(path.string() + ": real arrays cannot be written as u16");
  GsmbArray a{dtype, array.shape(), {array.storage().begin(), array.storage().end()}, {}};
  write_bytes(path, encode_gsmb(a));
}

void write_gsmb_u16(const std::filesystem::path& path, const nn::Shape& shape, std::span<const std::uint16_t> values) {
  GsmbArray a{DType::u16, shape, {}, std::vector<std::uint16_t>(values.begin(), values.end())};
  write_bytes(path, encode_gsmb(a));
}

GsmbArray read_gsmb_raw(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(path.string() + ": missing or unreadable");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_gsmb(bytes, path.string());
}

nn::NDArray read_gsmb(const std::filesystem::path& path) {
  auto a = read_gsmb_raw(path);
  if (a.dtype == DType::u16) throw FormatError(path.string() + ": expected a real-valued array, found u16");
  return nn::NDArray(a.shape, std::move(a.real));
}

std::vector<std::uint16_t> read_gsmb_u16(const std::filesystem::path& path, nn::Shape& shape) {
  auto a = read_gsmb_raw(path);
  if (a.dtype != DType::u16) throw FormatError(path.string() + ": expected a u16 array");
  shape = a.shape;
  return std::move(a.ints);
}

}  // namespace golfsig::io
