#pragma once

#include <string_view>

namespace labrbf::log {

/// Verbosity comes from the LABKRR_LOG environment variable
/// (trace, debug, info, warn, error, off). Default: warn.
void init_from_env();

void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);

}  // namespace labrbf::log
