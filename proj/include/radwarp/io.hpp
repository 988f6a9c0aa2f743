#pragma once

#include "radwarp/core.hpp"

#include <string>
#include <vector>

namespace radwarp {

/// Multi-plane grid container for file exchange. All planes share dims.
struct GridFile {
    std::vector<std::string> plane_names;  // one per channel, may be empty
    std::vector<GridD> planes;
};

/// RWGRID1: little-endian binary raster stack.
///   bytes 0..6   magic "RWGRID1"
///   u32 width, height, channels
///   u32 name table length, then that many bytes of '\n'-joined plane names
///   channels * height * width f64 values, row-major per plane
void write_grid(const std::string& path, const GridFile& g);
GridFile read_grid(const std::string& path);

/// Convenience wrappers for a single unnamed plane.
void write_grid(const std::string& path, const GridD& plane);
GridD read_grid_plane(const std::string& path);

/// Complex spectrum stored as interleaved re/im planes (2 per channel).
void write_spectrum_planes(const std::string& path, const std::vector<GridC>& channels);
std::vector<GridC> read_spectrum_planes(const std::string& path);

/// 8-bit binary PGM, values mapped linearly from [lo, hi] (clamped).
/// Pass lo >= hi to auto-scale to the plane's min/max.
void write_pgm(const std::string& path, const GridD& plane, double lo = 0.0, double hi = 0.0);

/// 8-bit binary PPM with a blue-cyan-yellow-red heat colormap over [lo, hi];
/// pixels where valid == 0 render black. Pass an empty valid mask to skip masking.
void write_ppm_heat(const std::string& path, const GridD& plane, const GridB& valid,
                    double lo = 0.0, double hi = 0.0);

/// Minimal CSV emitter: one header row then data rows, numbers at full
/// round-trip precision so files are byte-stable across runs.
class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path, const std::vector<std::string>& header);
    ~CsvWriter();
    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& cells);

  private:
    struct Impl;
    Impl* impl_;
};

std::string format_double(double v);

}  // namespace radwarp
