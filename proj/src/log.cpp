#include "mlsq/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace mlsq {
namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_mutex;
}  // namespace

void set_quiet(bool quiet) noexcept { g_quiet = quiet; }

void log_info(std::string_view message) {
  if (g_quiet) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[mlsq] " << message << '\n';
}

void log_warning(std::string_view message) {
  std::lock_guard lock(g_mutex);
  std::cerr << "[mlsq] warning: " << message << '\n';
}

}  // namespace mlsq
