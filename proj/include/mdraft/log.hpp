#ifndef MDRAFT_LOG_HPP
#define MDRAFT_LOG_HPP

#include <sstream>
#include <string>

namespace mdraft {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

// Threshold comes from the MDRAFT_LOG environment variable
// (debug|info|warn|error|off); default is warn. Output goes to stderr.
LogLevel log_threshold();
void set_log_threshold(LogLevel level);
void log_line(LogLevel level, const std::string& msg);

namespace detail {
inline void log_fold(std::ostringstream&) {}
template <typename T, typename... Rest>
void log_fold(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  log_fold(os, rest...);
}
}  // namespace detail

template <typename... Args>
void logf(LogLevel level, const Args&... args) {
  if (level < log_threshold()) return;
  std::ostringstream os;
  detail::log_fold(os, args...);
  log_line(level, os.str());
}

#define MDRAFT_DEBUG(...) ::mdraft::logf(::mdraft::LogLevel::debug, __VA_ARGS__)
#define MDRAFT_INFO(...) ::mdraft::logf(::mdraft::LogLevel::info, __VA_ARGS__)
#define MDRAFT_WARN(...) ::mdraft::logf(::mdraft::LogLevel::warn, __VA_ARGS__)
#define MDRAFT_ERROR(...) ::mdraft::logf(::mdraft::LogLevel::error, __VA_ARGS__)

}  // namespace mdraft

#endif  // MDRAFT_LOG_HPP
