#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ddvc/container.hpp"
#include "ddvc/rans.hpp"

using namespace ddvc;

TEST_CASE("empty symbol list yields flush bytes only") {
    auto bytes = rans::encode({}, {});
    CHECK(bytes.size() == 4);
    auto back = rans::decode(bytes, {});
    CHECK(back.empty());
}

TEST_CASE("uniform 256-ary stream compresses to ~1 byte per symbol") {
    std::mt19937 rng(1);
    std::vector<int32_t> vals(10000);
    std::vector<const rans::CdfTable*> ctx(vals.size(), &rans::uniform_byte_table());
    for (auto& v : vals) v = int32_t(rng() & 0xFF);
    auto bytes = rans::encode(vals, ctx);
    CHECK(double(bytes.size()) > 10000 * 0.99);
    CHECK(double(bytes.size()) < 10000 * 1.01 + 8);
    CHECK(rans::decode(bytes, ctx) == vals);
}

TEST_CASE("round trip over random tables and symbols, escapes included") {
    std::mt19937 rng(2);
    for (int rep = 0; rep < 50; ++rep) {
        double sigma = std::exp(std::uniform_real_distribution<double>(-2.0, 4.0)(rng));
        const auto t = rans::build_gaussian_table(sigma);
        std::normal_distribution<double> gauss(0.0, sigma);
        std::vector<int32_t> vals(500);
        for (auto& v : vals) v = int32_t(std::lround(gauss(rng)));
        vals[0] = 100000;   // forced escape
        vals[1] = -100000;  // forced escape, negative
        std::vector<const rans::CdfTable*> ctx(vals.size(), &t);
        auto bytes = rans::encode(vals, ctx);
        auto back = rans::decode(bytes, ctx);
        REQUIRE(back == vals);
    }
}

TEST_CASE("mixed per-symbol contexts round trip") {
    std::mt19937 rng(3);
    std::vector<int32_t> vals;
    std::vector<const rans::CdfTable*> ctx;
    for (int i = 0; i < 2000; ++i) {
        int level = int(rng() % rans::kScaleLevels);
        const auto& t = rans::scale_table(level);
        std::normal_distribution<double> gauss(0.0, rans::scale_value(level));
        vals.push_back(int32_t(std::lround(gauss(rng))));
        ctx.push_back(&t);
    }
    auto bytes = rans::encode(vals, ctx);
    CHECK(rans::decode(bytes, ctx) == vals);
    // quantized-table cost bounds the actual stream size tightly
    double est = rans::table_bits(vals, ctx);
    CHECK(double(bytes.size()) * 8 <= est * 1.001 + 64);
    CHECK(double(bytes.size()) * 8 >= est - 8);
}

TEST_CASE("gaussian tables: tails, floors and exact total") {
    for (double sigma : {0.11, 0.5, 1.0, 7.3, 256.0}) {
        auto t = rans::build_gaussian_table(sigma);
        REQUIRE(t.cum.back() == rans::kProbScale);
        for (size_t i = 1; i < t.cum.size(); ++i) CHECK(t.cum[i] > t.cum[i - 1]);
        CHECK(t.has_escape);
    }
    // scale table index round-trips its own level values
    for (int i = 0; i < rans::kScaleLevels; ++i)
        CHECK(rans::scale_index(rans::scale_value(i)) == i);
}

TEST_CASE("container pack/parse identity on a 3-frame stream") {
    container::Container c;
    c.codec_id = container::kDeep;
    c.width = 64;
    c.height = 64;
    c.gop_size = 8;
    c.lambda_id = 4;
    c.table_version = rans::kScaleTableVersion;
    std::mt19937 rng(4);
    for (int i = 0; i < 3; ++i) {
        container::FrameStream f;
        f.role = i == 0 ? container::kKey : container::kWz;
        for (int s = 0; s < 3; ++s) {
            std::vector<uint8_t> payload(16 + rng() % 64);
            for (auto& b : payload) b = uint8_t(rng());
            f.substreams.push_back(std::move(payload));
        }
        c.frames.push_back(std::move(f));
    }
    auto bytes = container::pack(c);
    auto back = container::parse(bytes);
    CHECK(back.width == 64);
    CHECK(back.lambda_id == 4);
    REQUIRE(back.frames.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(back.frames[i].substreams == c.frames[i].substreams);
    CHECK(container::pack(back) == bytes);

    // bpp accounting is payload bits over pixels
    CHECK(c.bpp() ==
          doctest::Approx(double(c.payload_bytes()) * 8 / (64.0 * 64.0 * 3)));
}

TEST_CASE("container rejects tampering, truncation and bad magic") {
    container::Container c;
    c.width = c.height = 16;
    container::FrameStream f;
    f.role = container::kKey;
    f.substreams.push_back({1, 2, 3, 4, 5});
    c.frames.push_back(f);
    auto bytes = container::pack(c);

    auto flipped = bytes;
    flipped[flipped.size() - 6] ^= 0x01;  // payload byte
    CHECK_THROWS_WITH_AS(container::parse(flipped), doctest::Contains("checksum"),
                         container::ContainerError);

    auto trunc = bytes;
    trunc.resize(trunc.size() - 3);
    CHECK_THROWS_AS(container::parse(trunc), container::ContainerError);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(container::parse(bad), doctest::Contains("magic"),
                         container::ContainerError);
}
