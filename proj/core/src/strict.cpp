#include <atomic>

#include "ddatr/tensor.hpp"

namespace ddatr {

namespace {
std::atomic<bool> g_strict{false};
}

bool strict_nonfinite_checks() { return g_strict.load(std::memory_order_relaxed); }
void set_strict_nonfinite_checks(bool enabled) { g_strict.store(enabled, std::memory_order_relaxed); }

}  // namespace ddatr
