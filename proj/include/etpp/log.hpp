// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <string_view>

namespace etpp::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

void set_level(Level level);
Level level();

void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);

}  // namespace etpp::log
