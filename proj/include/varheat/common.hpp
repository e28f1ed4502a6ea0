#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace varheat {

// Spatial point, d in {1,2}. Unused components stay zero.
using Point = std::array<double, 2>;

inline Point pt(double x, double y = 0.0) { return {x, y}; }

inline double norm(const Point& p, int dim) {
    return dim == 1 ? std::abs(p[0]) : std::hypot(p[0], p[1]);
}

inline Point operator-(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator+(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator*(double c, const Point& a) { return {c * a[0], c * a[1]}; }

// ---------------------------------------------------------------------------
// deterministic hashing (config / model provenance)
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// splitmix64, used to derive per-path RNG seeds from (seed, index)
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// ---------------------------------------------------------------------------
// thread helpers
// ---------------------------------------------------------------------------

// Global worker cap; the CLI --threads flag sets it.
int  max_threads();
void set_max_threads(int n);

// Static block split of [0,n) over worker threads. Body must not throw.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    int nt = std::min<std::size_t>(max_threads(), n);
    if (nt <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> workers;
    std::size_t chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back(body, lo, hi);
    }
    for (auto& w : workers) w.join();
}

// ---------------------------------------------------------------------------
// misc numerics
// ---------------------------------------------------------------------------

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / double(n - 1);
    return v;
}

inline double sqr(double x) { return x * x; }

struct NumericsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace varheat
