#include "garag/log.hpp"

#include <iostream>
#include <mutex>

namespace garag::log {
namespace {

std::mutex g_mutex;
Sink g_sink;
Level g_threshold = Level::warn;

const char* level_tag(Level level) {
  switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
  }
  return "?";
}

}  // namespace

void set_sink(Sink sink) {
  std::lock_guard<std::mutex> lock(g_mutex);
  g_sink = std::move(sink);
}

void set_threshold(Level level) {
  std::lock_guard<std::mutex> lock(g_mutex);
  g_threshold = level;
}

void emit(Level level, std::string_view message) {
  std::lock_guard<std::mutex> lock(g_mutex);
  if (level < g_threshold) return;
  if (g_sink) {
    g_sink(level, message);
  } else {
    std::cerr << "[garag " << level_tag(level) << "] " << message << "\n";
  }
}

}  // namespace garag::log
