#include "golfsig/tok/fsq.hpp"

#include <cmath>
#include <string>

#include "golfsig/util/error.hpp"

namespace golfsig::tok {

void FsqSpec::validate() const {
  if (levels.empty()) throw ConfigError("fsq levels must not be empty");
  for (int l : levels)
    if (l < 2) throw ConfigError("fsq levels must all be at least 2, got " + std::to_string(l));
  if (codebook_size() > 65535) throw ConfigError("fsq codebook must fit a u16 token with one spare id");
}

std::size_t FsqSpec::codebook_size() const {
  std::size_t n = 1;
  for (int l : levels) n *= static_cast<std::size_t>(l);
  return n;
}

std::vector<double> FsqSpec::half() const {
  std::vector<double> h;
  for (int l : levels) h.push_back(l % 2 ? static_cast<double>(l / 2) : (l - 1) / 2.0);
  return h;
}

std::vector<double> FsqSpec::shift() const {
  std::vector<double> s;
  for (int l : levels) s.push_back(l % 2 ? 0.0 : 0.5);
  return s;
}

int fsq_pack(std::span<const int> idx, const FsqSpec& spec) {
  if (idx.size() != spec.channels()) throw DimensionError("fsq_pack: expected " + std::to_string(spec.channels()) + " indices");
  int code = 0, radix = 1;
  for (std::size_t c = 0; c < idx.size(); ++c) {
    if (idx[c] < 0 || idx[c] >= spec.levels[c])
      throw ValidationError("fsq_pack: index " + std::to_string(idx[c]) + " out of range for channel " +
                            std::to_string(c) + " with " + std::to_string(spec.levels[c]) + " levels");
    code += radix * idx[c];
    radix *= spec.levels[c];
  }
  return code;
}

std::vector<int> fsq_unpack(int code, const FsqSpec& spec) {
  if (code < 0 || static_cast<std::size_t>(code) >= spec.codebook_size())
    throw ValidationError("fsq_unpack: code " + std::to_string(code) + " outside [0, " +
                          std::to_string(spec.codebook_size()) + ")");
  std::vector<int> idx;
  for (int l : spec.levels) {
    idx.push_back(code % l);
    code /= l;
  }
  return idx;
}

std::vector<double> code_to_lattice(int code, const FsqSpec& spec) {
  const auto idx = fsq_unpack(code, spec);
  std::vector<double> q(idx.size());
  for (std::size_t c = 0; c < idx.size(); ++c) q[c] = idx[c] - (spec.levels[c] - 1) / 2.0;
  return q;
}

int lattice_to_code(std::span<const double> q, const FsqSpec& spec) {
  if (q.size() != spec.channels()) throw DimensionError("lattice_to_code: expected " + std::to_string(spec.channels()) + " channels");
  std::vector<int> idx(q.size());
  for (std::size_t c = 0; c < q.size(); ++c) idx[c] = static_cast<int>(std::lround(q[c] + (spec.levels[c] - 1) / 2.0));
  return fsq_pack(idx, spec);
}

Quantized fsq_quantize(std::span<const double> z, const FsqSpec& spec) {
  if (z.size() != spec.channels()) throw DimensionError("fsq_quantize: expected " + std::to_string(spec.channels()) + " channels");
  const auto h = spec.half();
  const auto s = spec.shift();
  Quantized out;
  for (std::size_t c = 0; c < z.size(); ++c) out.lattice.push_back(std::round(h[c] * std::tanh(z[c]) - s[c]) + s[c]);
  out.code = lattice_to_code(out.lattice, spec);
  return out;
}

}  // namespace golfsig::tok
