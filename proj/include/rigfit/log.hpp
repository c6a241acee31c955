#pragma once

#include <memory>
#include <string_view>

namespace spdlog {
class logger;
}

namespace rigfit {

/// stderr logger; level from RIGFIT_LOG (error|warn|info|debug, default warn).
std::shared_ptr<spdlog::logger> cli_logger();

/// Re-reads RIGFIT_LOG; unknown values fall back to warn.
void configure_logging_from_env();

} // namespace rigfit
