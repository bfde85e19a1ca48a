#include "bridgedss/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace bdss::log {

namespace {
std::atomic<Level> gLevel{Level::Warn};
std::mutex gMutex;
}  // namespace

void setLevel(Level l) { gLevel = l; }
Level level() { return gLevel; }

void write(Level l, std::string_view message) {
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error", "off"};
  std::lock_guard lock(gMutex);
  std::clog << '[' << kNames[static_cast<int>(l)] << "] " << message << '\n';
}

}  // namespace bdss::log
