#include "mdraft/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace mdraft {

namespace {

LogLevel parse_level(const char* s) {
  if (s == nullptr) return LogLevel::warn;
  const std::string v(s);
  if (v == "debug") return LogLevel::debug;
  if (v == "info") return LogLevel::info;
  if (v == "warn") return LogLevel::warn;
  if (v == "error") return LogLevel::error;
  if (v == "off") return LogLevel::off;
  return LogLevel::warn;
}

LogLevel& threshold_ref() {
  static LogLevel level = parse_level(std::getenv("MDRAFT_LOG"));
  return level;
}

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::debug: return "debug";
    case LogLevel::info: return "info";
    case LogLevel::warn: return "warn";
    case LogLevel::error: return "error";
    default: return "off";
  }
}

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

LogLevel log_threshold() { return threshold_ref(); }

void set_log_threshold(LogLevel level) { threshold_ref() = level; }

void log_line(LogLevel level, const std::string& msg) {
  std::lock_guard<std::mutex> lock(log_mutex());
  std::fprintf(stderr, "[%s] %s\n", level_name(level), msg.c_str());
}

}  // namespace mdraft
