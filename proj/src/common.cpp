#include "varheat/common.hpp"

#include <atomic>

namespace varheat {

namespace {
std::atomic<int> g_max_threads{0}; // 0 = hardware default
}

int max_threads() {
    int n = g_max_threads.load();
    if (n > 0) return n;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
}

void set_max_threads(int n) { g_max_threads.store(n); }

} // namespace varheat
