#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace radwarp {

// Dense raster/grid storage. Row-major so the memory layout matches the
// row-major RWGRID1 file format and image rasters (row = y / range bin).
using GridD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using GridC = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using GridI = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using GridB = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Number of worker threads: RADWARP_THREADS if set, else hardware concurrency.
unsigned thread_count();

/// Parallel map over [0, n): fn(i) must touch only state owned by index i.
/// Work is split into fixed-size chunks so results never depend on the
/// thread count; with one thread it degenerates to a plain loop.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

/// Parallel map over chunk indices [0, nchunks) with a fixed chunk layout.
/// Use when each chunk accumulates internally; combine partials in chunk order.
void parallel_chunks(std::int64_t nchunks, const std::function<void(std::int64_t)>& fn);

/// SplitMix64 bit mixer. Used to derive independent per-element RNG seeds
/// from (global seed, element index) so draws are schedule-independent.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Uniform draw in [0, 1) keyed by an arbitrary 64-bit index.
inline double uniform01(std::uint64_t key) {
    return static_cast<double>(mix64(key) >> 11) * 0x1.0p-53;
}

/// Two independent standard normal draws keyed by a 64-bit index. Counter
/// based, so any parallel schedule sees the same value for the same key.
Eigen::Vector2d gauss_pair(std::uint64_t key);

/// Inverse of the standard normal CDF (probit). |p| accuracy ~1e-15 after
/// the Halley refinement step.
double probit(double p);

/// Inverse Gaussian tail function: Q^{-1}(p) = probit(1 - p).
inline double inverse_q(double p) { return probit(1.0 - p); }

}  // namespace radwarp
