#pragma once

#include <filesystem>

#include "golfsig/data/swing.hpp"

namespace golfsig::data {

inline constexpr const char* kManifestName = "manifest.json";

/// Writes `<id>.pose.bin` (f64), `<id>.imu.bin` (f64), `<id>.root.bin` (f64)
/// and `<id>.tok.bin` (u16) for whichever arrays a record holds, plus
/// manifest.json.
void write_dataset(const std::vector<SwingRecord>& records, const std::filesystem::path& dir);

/// Throws FormatError naming the offending file on any inconsistency.
std::vector<SwingRecord> read_dataset(const std::filesystem::path& dir);

}  // namespace golfsig::data
