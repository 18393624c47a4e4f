#include "mmdebias/common/log.hpp"

#include <mutex>

namespace mmdebias::log {

Level& threshold() {
  static Level level = Level::warn;
  return level;
}

void write(Level level, std::string_view msg) {
  if (level < threshold()) return;
  static std::mutex mu;
  static constexpr const char* names[] = {"debug", "info", "warn", "error", "off"};
  std::lock_guard lock(mu);
  std::cerr << '[' << names[static_cast<int>(level)] << "] " << msg << '\n';
}

}  // namespace mmdebias::log
