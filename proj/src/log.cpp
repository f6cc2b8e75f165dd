// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace etpp::log {
namespace {

std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mutex;

void emit(Level lvl, std::string_view tag, std::string_view message) {
    if (lvl < g_level.load()) return;
    const std::lock_guard lock(g_mutex);
    std::cerr << "[" << tag << "] " << message << '\n';
}

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void debug(std::string_view message) { emit(Level::kDebug, "debug", message); }
void info(std::string_view message) { emit(Level::kInfo, "info", message); }
void warn(std::string_view message) { emit(Level::kWarn, "warn", message); }

}  // namespace etpp::log
