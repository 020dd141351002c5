#pragma once

#include "golfsig/data/generator.hpp"

namespace golfsig::data {

inline constexpr double kGravity = 9.80665;

/// Virtual wrist sensor. Channels 0-5: 6D of the frame-to-frame orientation
/// increment R[t-1]^T R[t] in the sensor frame (frame 0 repeats frame 1).
/// Channels 6-8: global acceleration of the sensor point from a central
/// second difference, plus (0, 0, g); end frames repeat their neighbours.
nn::NDArray simulate_imu(const kin::MotionSequence& motion, const kin::Skeleton& skeleton,
                         const SensorPlacement& placement, std::size_t smoothing_window = 1);

}  // namespace golfsig::data
