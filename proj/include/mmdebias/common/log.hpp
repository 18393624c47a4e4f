#pragma once

#include <iostream>
#include <string_view>

namespace mmdebias::log {

enum class Level { debug, info, warn, error, off };

Level& threshold();

void write(Level level, std::string_view msg);

inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warn(std::string_view msg) { write(Level::warn, msg); }

}  // namespace mmdebias::log
