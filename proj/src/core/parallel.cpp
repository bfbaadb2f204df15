#include "mfg/parallel.hpp"

#include <atomic>

namespace mfg {
namespace {
std::atomic<unsigned> g_max_threads{std::max(1u, std::thread::hardware_concurrency())};
}

void set_max_threads(unsigned n) { g_max_threads.store(std::max(1u, n)); }
unsigned max_threads() { return g_max_threads.load(); }

}  // namespace mfg
