#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace garag::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

using Sink = std::function<void(Level, std::string_view)>;

/// Replace the global sink. Passing an empty function restores the default
/// (stderr). Thread-safe.
void set_sink(Sink sink);

/// Messages below this level are dropped before reaching the sink.
/// Default: warn.
void set_threshold(Level level);

void emit(Level level, std::string_view message);

inline void debug(std::string_view m) { emit(Level::debug, m); }
inline void info(std::string_view m) { emit(Level::info, m); }
inline void warn(std::string_view m) { emit(Level::warn, m); }
inline void error(std::string_view m) { emit(Level::error, m); }

}  // namespace garag::log
