#include "fishdip/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace fishdip {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("FISHDIP_LOG_LEVEL");
    if (env == nullptr) return LogLevel::info;
    if (std::strcmp(env, "error") == 0) return LogLevel::error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    if (std::strcmp(env, "info") == 0) return LogLevel::info;
    std::fprintf(stderr, "[fishdip] unknown FISHDIP_LOG_LEVEL '%s', using info\n", env);
    return LogLevel::info;
  }();
  return level;
}

static void emit(const char* tag, const std::string& msg) {
  std::fprintf(stderr, "[fishdip %s] %s\n", tag, msg.c_str());
}

void log_error(const std::string& msg) { emit("error", msg); }

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) emit("info", msg);
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) emit("debug", msg);
}

}  // namespace fishdip
