#include "radwarp/io.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

using namespace radwarp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() / ("radwarp_io_test_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("grid files round-trip bit-exactly with plane names") {
    TempDir t;
    GridFile g;
    g.plane_names = {"depth", "flow_u"};
    GridD a(2, 3);
    a << 1.0, -2.5, 3.25, 0.0, 1e-300, -0.0;
    GridD b(2, 3);
    b << 7.0, 8.0, 9.0, 10.0, 11.0, 12.125;
    g.planes = {a, b};
    write_grid(t.path("g.rwgrid"), g);

    const GridFile r = read_grid(t.path("g.rwgrid"));
    REQUIRE(r.planes.size() == 2);
    CHECK(r.plane_names == g.plane_names);
    CHECK(r.planes[0] == a);
    CHECK(r.planes[1] == b);

    // Single-plane convenience wrappers.
    write_grid(t.path("p.rwgrid"), a);
    CHECK(read_grid_plane(t.path("p.rwgrid")) == a);
}

TEST_CASE("grid reader rejects corrupt headers") {
    TempDir t;
    std::ofstream f(t.path("bad.rwgrid"), std::ios::binary);
    f << "NOTGRID" << std::string(64, '\0');
    f.close();
    CHECK_THROWS_AS(read_grid(t.path("bad.rwgrid")), std::runtime_error);
    CHECK_THROWS_AS(read_grid(t.path("missing.rwgrid")), std::runtime_error);

    // Truncated payload.
    GridFile g;
    g.planes = {GridD::Ones(4, 4)};
    g.plane_names = {"x"};
    write_grid(t.path("trunc.rwgrid"), g);
    fs::resize_file(t.path("trunc.rwgrid"), fs::file_size(t.path("trunc.rwgrid")) - 8);
    CHECK_THROWS_AS(read_grid(t.path("trunc.rwgrid")), std::runtime_error);
}

TEST_CASE("spectrum planes round-trip complex data") {
    TempDir t;
    GridC u(2, 2);
    u << std::complex<double>(1, 2), std::complex<double>(-3, 4),
        std::complex<double>(0, -1), std::complex<double>(5.5, 0);
    GridC v = u * std::complex<double>(0, 1);
    write_spectrum_planes(t.path("s.rwgrid"), {u, v});
    const auto r = read_spectrum_planes(t.path("s.rwgrid"));
    REQUIRE(r.size() == 2);
    CHECK(r[0] == u);
    CHECK(r[1] == v);
}

TEST_CASE("pgm output is a valid 8-bit binary image with linear mapping") {
    TempDir t;
    GridD img(2, 2);
    img << 0.0, 5.0, 10.0, 20.0;
    write_pgm(t.path("i.pgm"), img, 0.0, 10.0);

    std::ifstream f(t.path("i.pgm"), std::ios::binary);
    std::string magic;
    int w, h, maxv;
    f >> magic >> w >> h >> maxv;
    f.get();  // single whitespace after the header
    CHECK(magic == "P5");
    CHECK(w == 2);
    CHECK(h == 2);
    CHECK(maxv == 255);
    unsigned char px[4];
    f.read(reinterpret_cast<char*>(px), 4);
    CHECK(px[0] == 0);
    CHECK(px[1] == 128);  // 5/10 of the range, rounded
    CHECK(px[2] == 255);
    CHECK(px[3] == 255);  // clamped above hi
}

TEST_CASE("ppm heatmap masks invalid pixels black") {
    TempDir t;
    GridD img(1, 3);
    img << 0.0, 5.0, 10.0;
    GridB valid(1, 3);
    valid << 1, 0, 1;
    write_ppm_heat(t.path("i.ppm"), img, valid, 0.0, 10.0);

    std::ifstream f(t.path("i.ppm"), std::ios::binary);
    std::string magic;
    int w, h, maxv;
    f >> magic >> w >> h >> maxv;
    f.get();
    CHECK(magic == "P6");
    CHECK(w == 3);
    CHECK(h == 1);
    unsigned char px[9];
    f.read(reinterpret_cast<char*>(px), 9);
    // Middle pixel masked -> pure black; ends carry color.
    CHECK((int(px[3]) + int(px[4]) + int(px[5])) == 0);
    CHECK((int(px[0]) + int(px[1]) + int(px[2])) > 0);
    CHECK((int(px[6]) + int(px[7]) + int(px[8])) > 0);
}

TEST_CASE("csv writer emits a header and full-precision rows") {
    TempDir t;
    {
        CsvWriter csv(t.path("m.csv"), {"a", "b"});
        csv.row({1.0, 0.1});
        csv.row_mixed({"x", "2.5"});
    }
    std::ifstream f(t.path("m.csv"));
    std::string l1, l2, l3;
    std::getline(f, l1);
    std::getline(f, l2);
    std::getline(f, l3);
    CHECK(l1 == "a,b");
    CHECK(l2.substr(0, 2) == "1,");
    CHECK(l3 == "x,2.5");
    // 0.1 must round-trip.
    const double back = std::stod(l2.substr(2));
    CHECK(back == 0.1);
}

TEST_CASE("format_double round-trips doubles compactly") {
    for (double v : {0.1, 1.0, -2.5, 3.141592653589793, 1e-17, 12345678.9}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-0.5) == "-0.5");
}
