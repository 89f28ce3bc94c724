#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ddvc/classic_wz.hpp"

using namespace ddvc;

static double psnr(const Tensor& a, const Tensor& b) {
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = double(a.v[i]) - b.v[i];
        acc += d * d;
    }
    acc /= double(a.size());
    return acc <= 0 ? 100.0 : std::min(100.0, 10.0 * std::log10(1.0 / acc));
}

static VideoSequence moving_sequence(int n, int h, int w) {
    VideoSequence seq;
    seq.width = w;
    seq.height = h;
    float cx = 0.3f * float(w);
    for (int i = 0; i < n; ++i) {
        Frame f;
        f.index = i + 1;
        f.pixels = Tensor(3, h, w);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    float d2 = (x - cx) * (x - cx) + (y - 0.5f * h) * (y - 0.5f * h);
                    float stripes = 0.05f * std::sin(0.4f * float(y) + 0.2f * float(c));
                    f.pixels.at(c, y, x) =
                        std::clamp(0.3f + stripes + 0.5f * std::exp(-d2 / 80.f), 0.f, 1.f);
                }
        seq.frames.push_back(std::move(f));
        cx += 2.0f;
    }
    return seq;
}

TEST_CASE("4x4 DCT is orthonormal: exact round trip and DC behavior") {
    std::mt19937 rng(1);
    Tensor plane(1, 16, 12);
    std::uniform_real_distribution<float> d(0.f, 1.f);
    for (auto& v : plane.v) v = d(rng);
    auto bands = classic::dct4(plane);
    CHECK(bands.c == 16);
    CHECK(bands.h == 4);
    CHECK(bands.w == 3);
    auto back = classic::idct4(bands);
    for (size_t i = 0; i < plane.size(); ++i)
        CHECK(back.v[i] == doctest::Approx(plane.v[i]).epsilon(1e-5));

    // constant block: all energy in DC, DC = 4 * mean
    Tensor flat(1, 4, 4);
    flat.fill(0.25f);
    auto fb = classic::dct4(flat);
    CHECK(fb.at(0, 0, 0) == doctest::Approx(1.0f));
    for (int band = 1; band < 16; ++band) CHECK(std::fabs(fb.at(band, 0, 0)) < 1e-6f);

    // Parseval: energy is preserved
    double pe = 0, be = 0;
    for (float v : plane.v) pe += double(v) * v;
    for (float v : bands.v) be += double(v) * v;
    CHECK(be == doctest::Approx(pe).epsilon(1e-5));
}

TEST_CASE("quality presets are monotone in total coded bits") {
    int prev = 0;
    for (int q = 0; q < classic::kQualityCount; ++q) {
        const auto& p = classic::preset(q);
        int total = 0;
        for (int b : p) {
            CHECK(b >= 0);
            CHECK(b <= 7);
            total += b;
        }
        CHECK(total > prev);
        prev = total;
        CHECK(p[0] >= p[5]);  // DC gets at least as many planes as mid bands
    }
    CHECK_THROWS_AS(classic::preset(8), std::invalid_argument);
}

TEST_CASE("LDPCA: syndrome consistency and exact full-reveal solve") {
    const auto& code = classic::Ldpca::instance();
    std::mt19937 rng(2);
    std::vector<uint8_t> x(classic::kLdpcaN);
    for (auto& b : x) b = uint8_t(rng() & 1);
    auto revealed = code.syndromes(x);

    // garbage prior, full syndromes: linear solve must recover x exactly
    std::vector<double> llr(classic::kLdpcaN, 0.0);
    std::vector<uint8_t> out;
    REQUIRE(code.decode(llr, revealed, classic::kLdpcaChunks, out));
    CHECK(out == x);
}

TEST_CASE("LDPCA approaches the Slepian-Wolf bound on a BSC") {
    std::mt19937 rng(3);
    for (double p : {0.02, 0.05, 0.1, 0.2}) {
        double h = -p * std::log2(p) - (1 - p) * std::log2(1 - p);
        int ok = 0, trials = 12;
        for (int t = 0; t < trials; ++t) {
            auto r = classic::sw_rate_trial(p, rng);
            if (r.ok && r.rate >= h - 0.02 && r.rate <= h + 0.25) ++ok;
        }
        CHECK(ok == trials);
    }
}

TEST_CASE("CRC-8 detects single-bit corruption") {
    std::vector<uint8_t> data(64, 0xA5);
    uint8_t c0 = classic::crc8(data.data(), data.size());
    data[10] ^= 0x04;
    CHECK(classic::crc8(data.data(), data.size()) != c0);
}

TEST_CASE("classic codec round trip beats its side information") {
    auto seq = moving_sequence(5, 32, 32);
    classic::ClassicStats stats;
    auto c = classic::classic_encode(seq, 4, 4, &stats);
    CHECK(stats.wz_frames == 3);
    CHECK(stats.wz_syndrome_bits > 0);
    CHECK(c.frames[0].role == container::kKey);
    CHECK(c.frames[4].role == container::kKey);

    auto bytes = container::pack(c);
    auto res = classic::classic_decode(container::parse(bytes));
    REQUIRE(res.video.count() == 5);
    REQUIRE(res.side_info.count() == 5);

    double gain = 0;
    for (int i : {1, 2, 3}) {
        double dec_psnr = psnr(res.video.frames[size_t(i)].pixels, seq.frames[size_t(i)].pixels);
        double si_psnr =
            psnr(res.side_info.frames[size_t(i)].pixels, seq.frames[size_t(i)].pixels);
        gain += dec_psnr - si_psnr;
    }
    CHECK(gain / 3.0 > 0.2);

    // decode twice: bit-identical reconstructions
    auto res2 = classic::classic_decode(container::parse(bytes));
    for (size_t i = 0; i < 5; ++i)
        CHECK(res.video.frames[i].pixels.v == res2.video.frames[i].pixels.v);
}

TEST_CASE("higher quality presets spend more rate and reconstruct better") {
    auto seq = moving_sequence(3, 32, 32);
    classic::ClassicStats lo_stats, hi_stats;
    auto lo = classic::classic_encode(seq, 2, 1, &lo_stats);
    auto hi = classic::classic_encode(seq, 2, 6, &hi_stats);
    CHECK(hi_stats.wz_syndrome_bits > lo_stats.wz_syndrome_bits);

    auto lo_dec = classic::classic_decode(lo);
    auto hi_dec = classic::classic_decode(hi);
    CHECK(psnr(hi_dec.video.frames[1].pixels, seq.frames[1].pixels) >=
          psnr(lo_dec.video.frames[1].pixels, seq.frames[1].pixels));
}
