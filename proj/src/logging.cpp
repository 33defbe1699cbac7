#include "dynbn/logging.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace dynbn::log {

static Level parse_env() {
  const char* v = std::getenv("DYNBN_LOG");
  if (v == nullptr) return Level::Warn;
  if (std::strcmp(v, "error") == 0) return Level::Error;
  if (std::strcmp(v, "warn") == 0) return Level::Warn;
  if (std::strcmp(v, "info") == 0) return Level::Info;
  if (std::strcmp(v, "debug") == 0) return Level::Debug;
  return Level::Warn;
}

Level threshold() {
  static const Level cached = parse_env();
  return cached;
}

void write(Level level, const std::string& message) {
  if (level > threshold()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[dynbn %s] %s\n", names[static_cast<int>(level)],
               message.c_str());
}

}  // namespace dynbn::log
