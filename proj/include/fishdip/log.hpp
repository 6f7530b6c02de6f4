#pragma once

#include <string>

namespace fishdip {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Level comes from FISHDIP_LOG_LEVEL ("error" | "info" | "debug"), read once;
// unknown values fall back to info. Messages go to stderr.
LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace fishdip
