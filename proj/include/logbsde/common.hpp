#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace logbsde {

using Real = double;

/// Error with a stable machine-readable code ("invalid-interval",
/// "numeric-fault", ...) alongside the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& what) {
    throw Error(std::move(code), what);
}

inline void require(bool cond, const char* code, const std::string& what) {
    if (!cond) fail(code, what);
}

inline Real sqr(Real x) { return x * x; }

/// y*log|y| with its continuous extension 0 at y=0.
inline Real xlogx(Real y) {
    return y == 0.0 ? 0.0 : y * std::log(std::abs(y));
}

inline Real dot(std::span<const Real> a, std::span<const Real> b) {
    Real s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline Real norm2(std::span<const Real> a) {
    Real s = 0.0;
    for (Real v : a) s += v * v;
    return std::sqrt(s);
}

inline bool all_finite(std::span<const Real> a) {
    for (Real v : a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

/// Chunked parallel loop. Work must write to disjoint state per index;
/// chunk boundaries never affect results.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                         unsigned jobs = 0) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    if (jobs <= 1 || n < 2 * jobs) {
        body(0, n);
        return;
    }
    std::vector<std::thread> workers;
    const std::size_t chunk = (n + jobs - 1) / jobs;
    for (unsigned j = 0; j < jobs; ++j) {
        const std::size_t lo = j * chunk;
        if (lo >= n) break;
        const std::size_t hi = std::min(n, lo + chunk);
        workers.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& w : workers) w.join();
}

}  // namespace logbsde
