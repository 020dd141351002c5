#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace golfsig::tok {

/// Finite scalar quantisation over a few bounded latent channels.
struct FsqSpec {
  std::vector<int> levels{7, 6, 5};

  void validate() const;
  std::size_t channels() const { return levels.size(); }
  std::size_t codebook_size() const;
  /// Per-channel bound of the tanh squashing: floor(L/2) for odd L, (L-1)/2 for even L.
  std::vector<double> half() const;
  /// 0 for odd L, 0.5 for even L; lattice points are round(u - shift) + shift.
  std::vector<double> shift() const;
};

/// Mixed-radix packing, little-endian in channel order.
int fsq_pack(std::span<const int> indices, const FsqSpec& spec);
std::vector<int> fsq_unpack(int code, const FsqSpec& spec);

struct Quantized {
  std::vector<double> lattice;
  int code = 0;
};

Quantized fsq_quantize(std::span<const double> z, const FsqSpec& spec);

/// Lattice point of a code and back.
std::vector<double> code_to_lattice(int code, const FsqSpec& spec);
int lattice_to_code(std::span<const double> lattice, const FsqSpec& spec);

}  // namespace golfsig::tok
