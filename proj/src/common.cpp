#include "ppt/common.hpp"

#include <cstdlib>
#include <iostream>

namespace ppt {

namespace {

LogLevel level_from_env() {
    const char* env = std::getenv("PPT_LOG");
    if (!env) return LogLevel::Info;
    const std::string v(env);
    if (v == "quiet") return LogLevel::Quiet;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

LogLevel& current_level() {
    static LogLevel level = level_from_env();
    return level;
}

}  // namespace

LogLevel log_level() { return current_level(); }

void set_log_level(LogLevel level) { current_level() = level; }

void log_info(const std::string& message) {
    if (current_level() >= LogLevel::Info) std::cerr << message << "\n";
}

void log_debug(const std::string& message) {
    if (current_level() >= LogLevel::Debug) std::cerr << message << "\n";
}

}  // namespace ppt
