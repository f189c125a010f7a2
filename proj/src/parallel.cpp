#include "geolens/parallel.hpp"

namespace geolens {

namespace {
std::atomic<int> g_thread_limit{0};
}

void set_thread_limit(int n) { g_thread_limit = std::max(0, n); }

int thread_limit() {
    const int n = g_thread_limit.load();
    if (n > 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace geolens
