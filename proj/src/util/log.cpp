#include "golfsig/util/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <string>

namespace golfsig {

void configure_logging() {
  auto level = spdlog::level::info;
  if (const char* env = std::getenv("SWING_LOG")) {
    const std::string v(env);
    if (v == "error") level = spdlog::level::err;
    else if (v == "debug") level = spdlog::level::debug;
  }
  if (!spdlog::get("golfsig")) {
    spdlog::set_default_logger(spdlog::stderr_color_st("golfsig"));
  }
  spdlog::set_level(level);
  spdlog::set_pattern("[%l] %v");
}

}  // namespace golfsig
