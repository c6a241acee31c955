#include "rigfit/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string>

namespace rigfit {

std::shared_ptr<spdlog::logger> cli_logger() {
  static const std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_logger_st("rigfit");
    l->set_pattern("rigfit: %l: %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return logger;
}

void configure_logging_from_env() {
  const char* value = std::getenv("RIGFIT_LOG");
  const std::string level = value != nullptr ? value : "warn";
  auto logger = cli_logger();
  if (level == "error") {
    logger->set_level(spdlog::level::err);
  } else if (level == "info") {
    logger->set_level(spdlog::level::info);
  } else if (level == "debug") {
    logger->set_level(spdlog::level::debug);
  } else {
    logger->set_level(spdlog::level::warn);
  }
}

} // namespace rigfit
