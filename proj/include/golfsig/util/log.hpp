#pragma once

#include <spdlog/spdlog.h>

namespace golfsig {

/// Applies the SWING_LOG environment variable (error, info, debug) to the
/// default logger. Unset or unrecognised values leave the level at info.
void configure_logging();

}  // namespace golfsig
