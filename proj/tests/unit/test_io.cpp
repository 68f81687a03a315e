#include "fixtures.hpp"

#include "reveal/error.hpp"
#include "reveal/hash.hpp"
#include "reveal/io/binary.hpp"
#include "reveal/io/image_io.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <jpeglib.h>

using namespace reveal;
namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& p, const std::string& bytes)
{
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

// Baseline JPEG through libjpeg, used only to produce decoder inputs.
void write_jpeg(const fs::path& p, int w, int h, int components, const std::vector<unsigned char>& px)
{
    jpeg_compress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    FILE* f = std::fopen(p.c_str(), "wb");
    REQUIRE(f != nullptr);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = static_cast<JDIMENSION>(w);
    cinfo.image_height = static_cast<JDIMENSION>(h);
    cinfo.input_components = components;
    cinfo.in_color_space = components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, 100, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<unsigned char*>(px.data()) + cinfo.next_scanline * w * components;
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
}

} // namespace

TEST_CASE("PNG round trip preserves 8-bit levels; white maps to 1.0")
{
    fixtures::TempDir dir("png");
    std::vector<double> px(16);
    for (int i = 0; i < 16; ++i) {
        px[i] = i / 15.0;
    }
    const WorkingImage im(4, px, "grad");
    io::write_png(dir / "a.png", im);
    const WorkingImage back = io::read_working_image(dir / "a.png");
    REQUIRE(back.side() == 4);
    for (int i = 0; i < 16; ++i) {
        CHECK(back.data()[i] == doctest::Approx(std::round(px[i] * 255.0) / 255.0).epsilon(1e-12));
    }
    CHECK(back.data()[15] == 1.0);
    CHECK(back.data()[0] == 0.0);
}

TEST_CASE("PNG export clips out-of-range rendered values")
{
    fixtures::TempDir dir("clip");
    const WorkingImage im(2, {-0.5, 0.25, 1.7, 1.0});
    io::write_png(dir / "c.png", im);
    const auto back = io::read_working_image(dir / "c.png");
    CHECK(back.data()[0] == 0.0);
    CHECK(back.data()[2] == 1.0);
}

TEST_CASE("PGM ASCII and 16-bit binary decode with maxval scaling")
{
    fixtures::TempDir dir("pgm");
    write_bytes(dir / "a.pgm", "P2\n# comment\n2 2\n4\n0 1\n2 4\n");
    const auto a = io::read_raster(dir / "a.pgm");
    REQUIRE(a.width == 2);
    CHECK(a.values == std::vector<double>{0.0, 0.25, 0.5, 1.0});

    std::string bin = "P5\n2 1\n65535\n";
    bin += std::string("\xff\xff\x80\x00", 4);
    write_bytes(dir / "b.pgm", bin);
    const auto b = io::read_raster(dir / "b.pgm");
    REQUIRE(b.width == 2);
    CHECK(b.values[0] == 1.0);
    CHECK(b.values[1] == doctest::Approx(32768.0 / 65535.0));
}

TEST_CASE("JPEG decode: gray direct, color through luma weights")
{
    fixtures::TempDir dir("jpg");
    write_jpeg(dir / "g.jpg", 8, 8, 1, std::vector<unsigned char>(64, 255));
    const auto g = io::read_raster(dir / "g.jpg");
    REQUIRE(g.width == 8);
    for (double v : g.values) {
        CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
    }

    // Flat pure red: luma 0.299 up to JPEG's chroma rounding.
    std::vector<unsigned char> red(8 * 8 * 3, 0);
    for (int i = 0; i < 64; ++i) {
        red[3 * i] = 255;
    }
    write_jpeg(dir / "r.jpg", 8, 8, 3, red);
    const auto r = io::read_raster(dir / "r.jpg");
    for (double v : r.values) {
        CHECK(v == doctest::Approx(0.299).epsilon(0.02));
    }
}

TEST_CASE("area resampling matches hand-computed block weights")
{
    io::GrayRaster r;
    r.width = 3;
    r.height = 1;
    r.values = {0.0, 0.6, 0.9};
    // 3 -> 2 horizontally (each output spans 1.5 inputs); 1 -> 2 vertically (replication).
    const auto out = io::resample_area(r, 2);
    const double left = (0.0 + 0.5 * 0.6) / 1.5;
    const double right = (0.5 * 0.6 + 0.9) / 1.5;
    REQUIRE(out.size() == 4);
    CHECK(out[0] == doctest::Approx(left));
    CHECK(out[1] == doctest::Approx(right));
    CHECK(out[2] == doctest::Approx(left));
    CHECK(out[3] == doctest::Approx(right));

    io::GrayRaster sq;
    sq.width = sq.height = 4;
    sq.values.resize(16);
    for (int i = 0; i < 16; ++i) {
        sq.values[i] = i / 15.0;
    }
    const auto half = io::resample_area(sq, 2);
    CHECK(half[0] == doctest::Approx((0 + 1 + 4 + 5) / 60.0));
    CHECK(half[3] == doctest::Approx((10 + 11 + 14 + 15) / 60.0));
}

TEST_CASE("undecodable bytes raise Format")
{
    const std::vector<std::uint8_t> junk{'n', 'o', 't', ' ', 'a', 'n', ' ', 'i', 'm', 'a', 'g', 'e'};
    try {
        io::decode_raster(junk);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Format);
    }
}

TEST_CASE("SHA-256 and base64 match published test vectors")
{
    const std::string abc = "abc";
    CHECK(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex(std::span<const std::uint8_t>{}) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");

    const std::pair<const char*, const char*> vectors[] = {
        {"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},         {"foo", "Zm9v"},
        {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"},
    };
    for (const auto& [plain, enc] : vectors) {
        const std::string p = plain;
        CHECK(base64_encode({reinterpret_cast<const std::uint8_t*>(p.data()), p.size()}) == enc);
        const auto dec = base64_decode(enc);
        CHECK(std::string(dec.begin(), dec.end()) == p);
    }
    CHECK_THROWS_AS(base64_decode("abc"), Error);
    CHECK_THROWS_AS(base64_decode("a*c="), Error);
}

TEST_CASE("binary container round trip and magic check")
{
    fixtures::TempDir dir("bin");
    io::BinaryWriter w("TESTMAGC", 7);
    w.u32(42);
    w.i64(-5);
    w.f64(0.1);
    w.str("hello");
    const std::vector<double> v{1.5, -2.25, 1e-300};
    w.f64s(v);
    w.save_atomic(dir / "x.bin");

    auto r = io::BinaryReader::open(dir / "x.bin", "TESTMAGC");
    CHECK(r.version() == 7);
    CHECK(r.u32() == 42);
    CHECK(r.i64() == -5);
    CHECK(r.f64() == 0.1);
    CHECK(r.str() == "hello");
    CHECK(r.f64s() == v);
    CHECK(r.at_end());
    CHECK_THROWS_AS(io::BinaryReader::open(dir / "x.bin", "OTHERMAG"), Error);

    auto truncated = io::read_file(dir / "x.bin");
    truncated.resize(truncated.size() - 3);
    io::BinaryReader t(truncated, "TESTMAGC");
    t.u32();
    t.i64();
    t.f64();
    t.str();
    CHECK_THROWS_AS(t.f64s(), Error);
}
