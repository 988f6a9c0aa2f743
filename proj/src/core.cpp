#include "radwarp/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace radwarp {

unsigned thread_count() {
    if (const char* env = std::getenv("RADWARP_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

namespace {

// Chunk size is a function of n only. The same element always lands in the
// same chunk no matter how many workers run, which keeps any per-chunk
// accumulation order stable.
std::int64_t chunk_size_for(std::int64_t n) {
    constexpr std::int64_t kChunk = 1024;
    return std::min(kChunk, std::max<std::int64_t>(n, 1));
}

void run_chunked(std::int64_t nchunks, const std::function<void(std::int64_t)>& chunk_fn) {
    unsigned workers = std::min<std::int64_t>(thread_count(), nchunks);
    if (workers <= 1) {
        for (std::int64_t c = 0; c < nchunks; ++c) chunk_fn(c);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            // Static striping: chunk c belongs to worker c % workers.
            for (std::int64_t c = w; c < nchunks; c += workers) chunk_fn(c);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    const std::int64_t chunk = chunk_size_for(n);
    const std::int64_t nchunks = (n + chunk - 1) / chunk;
    run_chunked(nchunks, [&](std::int64_t c) {
        const std::int64_t lo = c * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
}

void parallel_chunks(std::int64_t nchunks, const std::function<void(std::int64_t)>& fn) {
    if (nchunks <= 0) return;
    run_chunked(nchunks, fn);
}

Eigen::Vector2d gauss_pair(std::uint64_t key) {
    const std::uint64_t a = mix64(key);
    const std::uint64_t b = mix64(a ^ 0xd1b54a32d192ed03ull);
    // Box-Muller; u1 in (0,1] so the log stays finite.
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(2.0 * kPi * u2), r * std::sin(2.0 * kPi * u2)};
}

double probit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("probit: p must be in (0,1)");

    // Acklam's rational approximation, then one Halley step against erfc.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement: e = Phi(x) - p.
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2.0 * kPi) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

}  // namespace radwarp
