#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <random>

#include "ddvc/eval.hpp"
#include "ddvc/png_io.hpp"

using namespace ddvc;
using eval::RdPoint;

static Tensor random_image(int c, int h, int w, uint32_t seed) {
    Tensor t(c, h, w);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(0.f, 1.f);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                t.at(ch, y, x) = 0.5f + 0.3f * std::sin(0.3f * float(x) + 0.2f * float(y)) +
                                 0.05f * d(rng);
    for (auto& v : t.v) v = std::clamp(v, 0.f, 1.f);
    return t;
}

// ---------------------------------------------------------------------
// brute-force MS-SSIM reference: direct 2D windows, no separable filter
namespace oracle {

static std::vector<std::vector<double>> window() {
    std::vector<std::vector<double>> w(11, std::vector<double>(11));
    double sum = 0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            double dy = i - 5.0, dx = j - 5.0;
            w[size_t(i)][size_t(j)] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
            sum += w[size_t(i)][size_t(j)];
        }
    for (auto& row : w)
        for (auto& v : row) v /= sum;
    return w;
}

static void terms(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                  double& lm, double& csm) {
    auto win = window();
    double lsum = 0, cssum = 0;
    int count = 0;
    for (int y = 0; y + 11 <= h; ++y)
        for (int x = 0; x + 11 <= w; ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    double va = a[size_t(y + i) * w + x + j], vb = b[size_t(y + i) * w + x + j];
                    double g = win[size_t(i)][size_t(j)];
                    ma += g * va;
                    mb += g * vb;
                    saa += g * va * va;
                    sbb += g * vb * vb;
                    sab += g * va * vb;
                }
            double c1 = 1e-4, c2 = 9e-4;
            lsum += (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            cssum += (2 * (sab - ma * mb) + c2) /
                     ((saa - ma * ma) + (sbb - mb * mb) + c2);
            ++count;
        }
    lm = lsum / count;
    csm = cssum / count;
}

static double ms_ssim(const Tensor& ta, const Tensor& tb) {
    const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    int scales = 5;
    while (scales > 1 && (std::min(ta.h, ta.w) >> (scales - 1)) < 11) --scales;
    double wsum = 0;
    for (int s = 0; s < scales; ++s) wsum += weights[s];
    double total = 0;
    for (int ch = 0; ch < ta.c; ++ch) {
        std::vector<double> a(ta.plane(ch), ta.plane(ch) + size_t(ta.h) * ta.w);
        std::vector<double> b(tb.plane(ch), tb.plane(ch) + size_t(ta.h) * ta.w);
        int h = ta.h, w = ta.w;
        double acc = 1;
        for (int s = 0; s < scales; ++s) {
            double l, cs;
            terms(a, b, h, w, l, cs);
            double wt = weights[s] / wsum;
            acc *= std::pow(std::max(s == scales - 1 ? l * cs : cs, 1e-12), wt);
            if (s + 1 == scales) break;
            int oh = h / 2, ow = w / 2;
            std::vector<double> na(size_t(oh) * ow), nb(size_t(oh) * ow);
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    na[size_t(y) * ow + x] = 0.25 * (a[size_t(2 * y) * w + 2 * x] +
                                                     a[size_t(2 * y) * w + 2 * x + 1] +
                                                     a[size_t(2 * y + 1) * w + 2 * x] +
                                                     a[size_t(2 * y + 1) * w + 2 * x + 1]);
                    nb[size_t(y) * ow + x] = 0.25 * (b[size_t(2 * y) * w + 2 * x] +
                                                     b[size_t(2 * y) * w + 2 * x + 1] +
                                                     b[size_t(2 * y + 1) * w + 2 * x] +
                                                     b[size_t(2 * y + 1) * w + 2 * x + 1]);
                }
            a = std::move(na);
            b = std::move(nb);
            h = oh;
            w = ow;
        }
        total += acc;
    }
    return total / ta.c;
}

}  // namespace oracle

TEST_CASE("psnr: exact values, cap, and shape checking") {
    Tensor a(3, 8, 8), b(3, 8, 8);
    a.fill(0.5f);
    b.fill(0.6f);  // MSE = 0.01 -> 20 dB
    CHECK(eval::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
    CHECK(eval::psnr(a, a) == 100.0);
    CHECK_THROWS_AS(eval::psnr(a, Tensor(3, 8, 9)), std::invalid_argument);
}

TEST_CASE("ms-ssim matches a brute-force reference within 1e-4") {
    auto a = random_image(3, 64, 48, 1);
    auto b = a;
    std::mt19937 rng(2);
    std::normal_distribution<float> noise(0.f, 0.04f);
    for (auto& v : b.v) v = std::clamp(v + noise(rng), 0.f, 1.f);

    double mine = eval::ms_ssim(a, b);
    double ref = oracle::ms_ssim(a, b);
    CHECK(mine == doctest::Approx(ref).epsilon(0).scale(1).epsilon(1e-9));
    CHECK(std::fabs(mine - ref) < 1e-4);
    CHECK(mine < 1.0);
    CHECK(mine > 0.5);
    CHECK(eval::ms_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

    // more noise, lower score
    auto worse = b;
    for (auto& v : worse.v) v = std::clamp(v + noise(rng) * 3.f, 0.f, 1.f);
    CHECK(eval::ms_ssim(a, worse) < mine);
}

TEST_CASE("msssim_db: 0.9 maps to exactly 10 dB and is monotone") {
    CHECK(eval::msssim_db(0.9) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(eval::msssim_db(0.99) == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(eval::msssim_db(0.95) > eval::msssim_db(0.9));
}

TEST_CASE("bd metrics: analytic shifts are recovered exactly") {
    std::vector<RdPoint> ref, test_r, test_q;
    for (double q : {30.0, 33.0, 36.0, 39.0}) {
        double rate = std::pow(10.0, 0.05 * q - 2.0 + 0.0005 * q * q);
        ref.push_back({rate, q});
        test_r.push_back({rate * 0.9, q});   // 10% cheaper everywhere
        test_q.push_back({rate, q + 1.2});   // 1.2 dB better everywhere
    }
    CHECK(eval::bd_rate(ref, test_r) == doctest::Approx(-10.0).epsilon(1e-6));
    CHECK(eval::bd_quality(ref, test_q) == doctest::Approx(1.2).epsilon(1e-6));
    CHECK(eval::bd_rate(ref, ref) == doctest::Approx(0.0).scale(1).epsilon(1e-9));
}

TEST_CASE("bd metrics agree with quadrature over interpolated cubics") {
    // independent oracle: Lagrange interpolation through the 4 points plus
    // Simpson integration, against the closed-form implementation
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    std::vector<RdPoint> ref, test;
    for (int i = 0; i < 4; ++i) {
        double q = 30 + 3 * i;
        ref.push_back({std::pow(10.0, -1.5 + 0.08 * q + jitter(rng) * 0.01), q});
        test.push_back({std::pow(10.0, -1.6 + 0.082 * q + jitter(rng) * 0.01), q + jitter(rng)});
    }
    auto lagrange = [](const std::array<double, 4>& xs, const std::array<double, 4>& ys,
                       double x) {
        double acc = 0;
        for (int i = 0; i < 4; ++i) {
            double term = ys[size_t(i)];
            for (int j = 0; j < 4; ++j)
                if (j != i) term *= (x - xs[size_t(j)]) / (xs[size_t(i)] - xs[size_t(j)]);
            acc += term;
        }
        return acc;
    };
    std::array<double, 4> qr{}, lr{}, qt{}, lt{};
    for (int i = 0; i < 4; ++i) {
        qr[size_t(i)] = ref[size_t(i)].quality;
        lr[size_t(i)] = std::log10(ref[size_t(i)].rate);
        qt[size_t(i)] = test[size_t(i)].quality;
        lt[size_t(i)] = std::log10(test[size_t(i)].rate);
    }
    double lo = std::max(qr[0], qt[0]), hi = std::min(qr[3], qt[3]);
    int n = 2000;
    double acc = 0;
    for (int i = 0; i <= n; ++i) {
        double x = lo + (hi - lo) * i / n;
        double f = lagrange(qt, lt, x) - lagrange(qr, lr, x);
        double wgt = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        acc += wgt * f;
    }
    acc *= (hi - lo) / (3.0 * n);
    double expect = (std::pow(10.0, acc / (hi - lo)) - 1.0) * 100.0;
    double got = eval::bd_rate(ref, test);
    CHECK(got == doctest::Approx(expect).epsilon(1e-3));
}

TEST_CASE("bd metrics reject degenerate inputs") {
    std::vector<RdPoint> three{{0.1, 30}, {0.2, 33}, {0.4, 36}};
    std::vector<RdPoint> four{{0.1, 30}, {0.2, 33}, {0.4, 36}, {0.8, 39}};
    CHECK_THROWS_AS(eval::bd_rate(three, four), std::invalid_argument);
    std::vector<RdPoint> disjoint{{0.1, 50}, {0.2, 53}, {0.4, 56}, {0.8, 59}};
    CHECK_THROWS_AS(eval::bd_rate(four, disjoint), std::invalid_argument);
    std::vector<RdPoint> negative{{-0.1, 30}, {0.2, 33}, {0.4, 36}, {0.8, 39}};
    CHECK_THROWS_AS(eval::bd_rate(negative, four), std::invalid_argument);
}

TEST_CASE("report writers produce parseable JSON and CSV plus an SVG chart") {
    VideoSequence ref, dec;
    ref.width = dec.width = 16;
    ref.height = dec.height = 16;
    container::Container c;
    c.width = c.height = 16;
    for (int i = 0; i < 2; ++i) {
        Frame f;
        f.index = i + 1;
        f.pixels = random_image(3, 16, 16, uint32_t(10 + i));
        ref.frames.push_back(f);
        for (auto& v : f.pixels.v) v = std::clamp(v + 0.02f, 0.f, 1.f);
        dec.frames.push_back(f);
        container::FrameStream fs;
        fs.role = i == 0 ? container::kKey : container::kWz;
        fs.substreams.push_back(std::vector<uint8_t>(40, 0));
        c.frames.push_back(fs);
    }
    auto r = eval::evaluate(ref, dec, c);
    CHECK(r.frames.size() == 2);
    CHECK(r.frames[0].role == "key");
    CHECK(r.bpp == doctest::Approx(2 * 40 * 8 / (16.0 * 16 * 3 * 2) * 3).epsilon(0.5));

    eval::write_json(r, "/tmp/ddvc_eval.json");
    eval::write_csv(r, "/tmp/ddvc_eval.csv");
    auto j = nlohmann::json::parse(std::ifstream("/tmp/ddvc_eval.json"));
    CHECK(j["frames"].size() == 2);
    CHECK(double(j["avg_psnr"]) == doctest::Approx(r.avg_psnr));
    std::ifstream csv("/tmp/ddvc_eval.csv");
    int lines = 0;
    for (std::string line; std::getline(csv, line);) ++lines;
    CHECK(lines == 3);

    std::map<std::string, std::vector<RdPoint>> curves{
        {"deep", {{0.1, 30}, {0.2, 33}}}, {"classic", {{0.15, 29}, {0.3, 31}}}};
    eval::write_svg(curves, "/tmp/ddvc_rd.svg");
    std::ifstream svg("/tmp/ddvc_rd.svg");
    std::string body((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
    CHECK(body.find("<svg") != std::string::npos);
    CHECK(body.find("polyline") != std::string::npos);
    CHECK(body.find("classic") != std::string::npos);
    for (const char* p : {"/tmp/ddvc_eval.json", "/tmp/ddvc_eval.csv", "/tmp/ddvc_rd.svg"})
        std::remove(p);
}

TEST_CASE("latent visualization: normalization and constant channels") {
    Tensor latent(3, 4, 4);
    for (int i = 0; i < 16; ++i) latent.plane(0)[i] = float(i);  // ramp
    latent.fill(0.f);
    for (int i = 0; i < 16; ++i) latent.plane(0)[i] = float(i);
    for (int i = 0; i < 16; ++i) latent.plane(1)[i] = 0.7f;  // constant
    for (int i = 0; i < 16; ++i) latent.plane(2)[i] = -float(i);

    auto paths = eval::visualize_latents(latent, "/tmp/ddvc_latents");
    REQUIRE(paths.size() == 3);
    auto ramp = png::read(paths[0]);
    CHECK(ramp.width == 4);
    CHECK(ramp.channels == 1);
    CHECK(ramp.pixels.front() == 0);
    CHECK(ramp.pixels.back() == 255);
    auto flat = png::read(paths[1]);
    for (auto p : flat.pixels) CHECK(int(p) == 128);
    for (auto& p : paths) std::remove(p.c_str());
}
