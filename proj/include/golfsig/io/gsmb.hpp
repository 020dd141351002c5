#pragma once

// GSMB: the project's binary array container.
//
//   offset  size     field
//   0       4        magic "GSMB"
//   4       1        version (1)
//   5       1        dtype (0 = f32, 1 = u16, 2 = f64)
//   6       1        ndim
//   7       1        reserved (0)
//   8       4*ndim   shape, u32 little-endian
//   ...              payload, row-major, little-endian
//
// See docs/formats.md for a hex dump of a small file.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "golfsig/nn/ndarray.hpp"

namespace golfsig::io {

enum class DType : std::uint8_t { f32 = 0, u16 = 1, f64 = 2 };

inline constexpr std::uint8_t kGsmbVersion = 1;

struct GsmbArray {
  DType dtype = DType::f64;
  nn::Shape shape;
  std::vector<double> real;        // f32 / f64 payloads
  std::vector<std::uint16_t> ints;  // u16 payloads
};

std::vector<std::uint8_t> encode_gsmb(const GsmbArray& array);
/// `name` is only used in error messages.
GsmbArray decode_gsmb(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");

void write_gsmb(const std::filesystem::path& path, const nn::NDArray& array, DType dtype = DType::f64);
void write_gsmb_u16(const std::filesystem::path& path, const nn::Shape& shape, std::span<const std::uint16_t> values);

GsmbArray read_gsmb_raw(const std::filesystem::path& path);
/// Reads a real-valued (f32 or f64) file.
nn::NDArray read_gsmb(const std::filesystem::path& path);
/// Reads a u16 file; `shape` receives its dimensions.
std::vector<std::uint16_t> read_gsmb_u16(const std::filesystem::path& path, nn::Shape& shape);

}  // namespace golfsig::io
