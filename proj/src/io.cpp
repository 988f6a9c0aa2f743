#include "radwarp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace radwarp {

namespace {

constexpr char kMagic[7] = {'R', 'W', 'G', 'R', 'I', 'D', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("RWGRID1: truncated header");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

}  // namespace

void write_grid(const std::string& path, const GridFile& g) {
    if (g.planes.empty()) throw std::invalid_argument("write_grid: no planes");
    const auto h = g.planes[0].rows(), w = g.planes[0].cols();
    for (const auto& p : g.planes)
        if (p.rows() != h || p.cols() != w)
            throw std::invalid_argument("write_grid: plane dims differ");
    if (!g.plane_names.empty() && g.plane_names.size() != g.planes.size())
        throw std::invalid_argument("write_grid: name count mismatch");

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_grid: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, static_cast<std::uint32_t>(w));
    put_u32(os, static_cast<std::uint32_t>(h));
    put_u32(os, static_cast<std::uint32_t>(g.planes.size()));
    std::string names;
    for (size_t i = 0; i < g.plane_names.size(); ++i) {
        if (i) names += '\n';
        names += g.plane_names[i];
    }
    put_u32(os, static_cast<std::uint32_t>(names.size()));
    os.write(names.data(), static_cast<std::streamsize>(names.size()));
    // Row-major doubles; host is little-endian x86-64, written as-is.
    for (const auto& p : g.planes)
        os.write(reinterpret_cast<const char*>(p.data()),
                 static_cast<std::streamsize>(sizeof(double) * p.size()));
    if (!os) throw std::runtime_error("write_grid: write failed for " + path);
}

GridFile read_grid(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_grid: cannot open " + path);
    char magic[7];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("read_grid: bad magic in " + path);
    const std::uint32_t w = get_u32(is), h = get_u32(is), c = get_u32(is);
    const std::uint32_t name_len = get_u32(is);
    std::string names(name_len, '\0');
    is.read(names.data(), name_len);
    GridFile g;
    if (name_len > 0) {
        std::stringstream ss(names);
        std::string line;
        while (std::getline(ss, line)) g.plane_names.push_back(line);
    }
    g.planes.resize(c);
    for (auto& p : g.planes) {
        p.resize(h, w);
        is.read(reinterpret_cast<char*>(p.data()),
                static_cast<std::streamsize>(sizeof(double) * p.size()));
    }
    if (!is) throw std::runtime_error("read_grid: truncated data in " + path);
    return g;
}

void write_grid(const std::string& path, const GridD& plane) {
    GridFile g;
    g.planes.push_back(plane);
    write_grid(path, g);
}

GridD read_grid_plane(const std::string& path) {
    GridFile g = read_grid(path);
    if (g.planes.size() != 1) throw std::runtime_error("read_grid_plane: not single-plane");
    return g.planes[0];
}

void write_spectrum_planes(const std::string& path, const std::vector<GridC>& channels) {
    GridFile g;
    for (size_t i = 0; i < channels.size(); ++i) {
        g.plane_names.push_back("u" + std::to_string(i + 1) + "_re");
        g.plane_names.push_back("u" + std::to_string(i + 1) + "_im");
        g.planes.push_back(channels[i].real());
        g.planes.push_back(channels[i].imag());
    }
    write_grid(path, g);
}

std::vector<GridC> read_spectrum_planes(const std::string& path) {
    GridFile g = read_grid(path);
    if (g.planes.size() % 2 != 0)
        throw std::runtime_error("read_spectrum_planes: odd plane count");
    std::vector<GridC> out(g.planes.size() / 2);
    for (size_t i = 0; i < out.size(); ++i) {
        out[i].resize(g.planes[0].rows(), g.planes[0].cols());
        out[i].real() = g.planes[2 * i];
        out[i].imag() = g.planes[2 * i + 1];
    }
    return out;
}

namespace {

void value_range(const GridD& plane, double& lo, double& hi) {
    if (lo < hi) return;
    lo = plane.minCoeff();
    hi = plane.maxCoeff();
    if (hi <= lo) hi = lo + 1.0;
}

unsigned char to_byte(double v, double lo, double hi) {
    double t = (v - lo) / (hi - lo);
    t = std::clamp(t, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(t * 255.0));
}

}  // namespace

void write_pgm(const std::string& path, const GridD& plane, double lo, double hi) {
    value_range(plane, lo, hi);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
    os << "P5\n" << plane.cols() << " " << plane.rows() << "\n255\n";
    std::vector<unsigned char> row(plane.cols());
    for (Eigen::Index r = 0; r < plane.rows(); ++r) {
        for (Eigen::Index c = 0; c < plane.cols(); ++c) row[c] = to_byte(plane(r, c), lo, hi);
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size()));
    }
}

void write_ppm_heat(const std::string& path, const GridD& plane, const GridB& valid,
                    double lo, double hi) {
    value_range(plane, lo, hi);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_ppm_heat: cannot open " + path);
    os << "P6\n" << plane.cols() << " " << plane.rows() << "\n255\n";
    const bool masked = valid.size() == plane.size();
    std::vector<unsigned char> row(3 * plane.cols());
    for (Eigen::Index r = 0; r < plane.rows(); ++r) {
        for (Eigen::Index c = 0; c < plane.cols(); ++c) {
            unsigned char* px = &row[3 * c];
            if (masked && valid(r, c) == 0) {
                px[0] = px[1] = px[2] = 0;
                continue;
            }
            // Piecewise-linear heat map: blue -> cyan -> yellow -> red.
            double t = std::clamp((plane(r, c) - lo) / (hi - lo), 0.0, 1.0);
            double rr, gg, bb;
            if (t < 1.0 / 3.0) {
                double s = t * 3.0;
                rr = 0.0; gg = s; bb = 1.0;
            } else if (t < 2.0 / 3.0) {
                double s = (t - 1.0 / 3.0) * 3.0;
                rr = s; gg = 1.0; bb = 1.0 - s;
            } else {
                double s = (t - 2.0 / 3.0) * 3.0;
                rr = 1.0; gg = 1.0 - s; bb = 0.0;
            }
            px[0] = static_cast<unsigned char>(std::lround(rr * 255.0));
            px[1] = static_cast<unsigned char>(std::lround(gg * 255.0));
            px[2] = static_cast<unsigned char>(std::lround(bb * 255.0));
        }
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size()));
    }
}

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct CsvWriter::Impl {
    std::ofstream os;
};

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : impl_(new Impl) {
    impl_->os.open(path);
    if (!impl_->os) {
        delete impl_;
        throw std::runtime_error("CsvWriter: cannot open " + path);
    }
    for (size_t i = 0; i < header.size(); ++i)
        impl_->os << (i ? "," : "") << header[i];
    impl_->os << "\n";
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::vector<double>& values) {
    for (size_t i = 0; i < values.size(); ++i)
        impl_->os << (i ? "," : "") << format_double(values[i]);
    impl_->os << "\n";
}

void CsvWriter::row_mixed(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) impl_->os << (i ? "," : "") << cells[i];
    impl_->os << "\n";
}

}  // namespace radwarp
