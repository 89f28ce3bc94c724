#include "ddvc/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "ddvc/png_io.hpp"
#include "ddvc/profile.hpp"

namespace ddvc::eval {

double psnr(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = double(a.v[i]) - b.v[i];
        acc += d * d;
    }
    acc /= double(a.size());
    if (acc <= 0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / acc));
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

const std::vector<double>& gauss_kernel() {
    static const std::vector<double> k = [] {
        std::vector<double> g(kWin);
        double sum = 0;
        for (int i = 0; i < kWin; ++i) {
            double d = i - (kWin - 1) / 2.0;
            g[size_t(i)] = std::exp(-d * d / (2 * kSigma * kSigma));
            sum += g[size_t(i)];
        }
        for (auto& v : g) v /= sum;
        return g;
    }();
    return k;
}

// valid-mode separable Gaussian filter of a single plane
std::vector<double> blur(const std::vector<double>& img, int h, int w, int& oh, int& ow) {
    const auto& k = gauss_kernel();
    oh = h - kWin + 1;
    ow = w - kWin + 1;
    std::vector<double> tmp(size_t(h) * ow, 0.0), out(size_t(oh) * ow, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int i = 0; i < kWin; ++i) acc += k[size_t(i)] * img[size_t(y) * w + x + i];
            tmp[size_t(y) * ow + x] = acc;
        }
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int i = 0; i < kWin; ++i) acc += k[size_t(i)] * tmp[size_t(y + i) * ow + x];
            out[size_t(y) * ow + x] = acc;
        }
    return out;
}

std::vector<double> downsample2(const std::vector<double>& img, int h, int w, int& oh, int& ow) {
    oh = h / 2;
    ow = w / 2;
    std::vector<double> out(size_t(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out[size_t(y) * ow + x] =
                0.25 * (img[size_t(2 * y) * w + 2 * x] + img[size_t(2 * y) * w + 2 * x + 1] +
                        img[size_t(2 * y + 1) * w + 2 * x] + img[size_t(2 * y + 1) * w + 2 * x + 1]);
    return out;
}

// mean luminance and contrast-structure terms of one plane pair
void ssim_terms(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                double& l_mean, double& cs_mean) {
    int oh, ow;
    auto mu_a = blur(a, h, w, oh, ow);
    auto mu_b = blur(b, h, w, oh, ow);
    std::vector<double> aa(a.size()), bb(b.size()), ab(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    auto s_aa = blur(aa, h, w, oh, ow);
    auto s_bb = blur(bb, h, w, oh, ow);
    auto s_ab = blur(ab, h, w, oh, ow);
    double lsum = 0, cssum = 0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
        double va = s_aa[i] - mu_a[i] * mu_a[i];
        double vb = s_bb[i] - mu_b[i] * mu_b[i];
        double cab = s_ab[i] - mu_a[i] * mu_b[i];
        lsum += (2 * mu_a[i] * mu_b[i] + kC1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1);
        cssum += (2 * cab + kC2) / (va + vb + kC2);
    }
    l_mean = lsum / double(mu_a.size());
    cs_mean = cssum / double(mu_a.size());
}

int scale_count(int h, int w) {
    int scales = 5;
    int m = std::min(h, w);
    while (scales > 1 && (m >> (scales - 1)) < kWin) --scales;
    return scales;
}

}  // namespace

double ms_ssim(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ms_ssim: shape mismatch");
    if (std::min(a.h, a.w) < kWin) throw std::invalid_argument("ms_ssim: image below window size");
    const int scales = scale_count(a.h, a.w);
    double wsum = 0;
    for (int s = 0; s < scales; ++s) wsum += kWeights[size_t(s)];

    double value = 0;
    for (int ch = 0; ch < a.c; ++ch) {
        std::vector<double> pa(a.plane(ch), a.plane(ch) + size_t(a.h) * a.w);
        std::vector<double> pb(b.plane(ch), b.plane(ch) + size_t(a.h) * a.w);
        int h = a.h, w = a.w;
        double acc = 1.0;
        for (int s = 0; s < scales; ++s) {
            double l, cs;
            ssim_terms(pa, pb, h, w, l, cs);
            double weight = kWeights[size_t(s)] / wsum;
            if (s == scales - 1)
                acc *= std::pow(std::max(l * cs, 1e-12), weight);
            else
                acc *= std::pow(std::max(cs, 1e-12), weight);
            if (s + 1 < scales) {
                int oh, ow;
                pa = downsample2(pa, h, w, oh, ow);
                pb = downsample2(pb, h, w, oh, ow);
                h = oh;
                w = ow;
            }
        }
        value += acc;
    }
    return value / a.c;
}

double msssim_db(double v) {
    v = std::min(v, 1.0 - 1e-10);
    return 10.0 * std::log10(1.0 / (1.0 - v));
}

double psnr_sequence(const VideoSequence& a, const VideoSequence& b) {
    if (a.count() != b.count() || a.count() == 0)
        throw std::invalid_argument("sequence metric: length mismatch");
    double acc = 0;
    for (size_t i = 0; i < a.count(); ++i) acc += psnr(a.frames[i].pixels, b.frames[i].pixels);
    return acc / double(a.count());
}

double ms_ssim_sequence(const VideoSequence& a, const VideoSequence& b) {
    if (a.count() != b.count() || a.count() == 0)
        throw std::invalid_argument("sequence metric: length mismatch");
    double acc = 0;
    for (size_t i = 0; i < a.count(); ++i) acc += ms_ssim(a.frames[i].pixels, b.frames[i].pixels);
    return acc / double(a.count());
}

// ------------------------------------------------- Bjontegaard deltas

namespace {

// least-squares cubic fit y = c0 + c1 x + c2 x^2 + c3 x^3
std::array<double, 4> polyfit3(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 4) throw std::invalid_argument("bd metrics need at least 4 points per curve");
    double a[4][5] = {};
    for (size_t k = 0; k < x.size(); ++k) {
        double pw[7] = {1, 0, 0, 0, 0, 0, 0};
        for (int i = 1; i < 7; ++i) pw[i] = pw[i - 1] * x[k];
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) a[r][c] += pw[r + c];
            a[r][4] += pw[r] * y[k];
        }
    }
    for (int col = 0; col < 4; ++col) {  // elimination with partial pivoting
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        if (std::fabs(a[col][col]) < 1e-12) throw std::invalid_argument("degenerate bd fit");
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            for (int c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
        }
    }
    return {a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]};
}

double integrate3(const std::array<double, 4>& c, double lo, double hi) {
    auto anti = [&](double x) {
        return c[0] * x + c[1] * x * x / 2 + c[2] * x * x * x / 3 + c[3] * x * x * x * x / 4;
    };
    return anti(hi) - anti(lo);
}

double bd_delta(const std::vector<RdPoint>& ref, const std::vector<RdPoint>& test,
                bool rate_over_quality) {
    auto split = [&](const std::vector<RdPoint>& pts, std::vector<double>& x,
                     std::vector<double>& y) {
        for (auto& p : pts) {
            if (p.rate <= 0) throw std::invalid_argument("bd metrics need positive rates");
            double lr = std::log10(p.rate);
            x.push_back(rate_over_quality ? p.quality : lr);
            y.push_back(rate_over_quality ? lr : p.quality);
        }
    };
    std::vector<double> xr, yr, xt, yt;
    split(ref, xr, yr);
    split(test, xt, yt);
    double lo = std::max(*std::min_element(xr.begin(), xr.end()),
                         *std::min_element(xt.begin(), xt.end()));
    double hi = std::min(*std::max_element(xr.begin(), xr.end()),
                         *std::max_element(xt.begin(), xt.end()));
    if (hi <= lo) throw std::invalid_argument("bd metrics: curves do not overlap");
    auto cr = polyfit3(xr, yr), ct = polyfit3(xt, yt);
    return (integrate3(ct, lo, hi) - integrate3(cr, lo, hi)) / (hi - lo);
}

}  // namespace

double bd_rate(const std::vector<RdPoint>& ref, const std::vector<RdPoint>& test) {
    return (std::pow(10.0, bd_delta(ref, test, true)) - 1.0) * 100.0;
}

double bd_quality(const std::vector<RdPoint>& ref, const std::vector<RdPoint>& test) {
    return bd_delta(ref, test, false);
}

// ----------------------------------------------------- reports and plots

EvalReport evaluate(const VideoSequence& ref, const VideoSequence& dec,
                    const container::Container& c) {
    if (ref.count() != dec.count() || ref.count() != c.frames.size())
        throw std::invalid_argument("evaluate: sequence/container length mismatch");
    EvalReport r;
    r.width = ref.width;
    r.height = ref.height;
    r.bpp = c.bpp();
    for (size_t i = 0; i < ref.count(); ++i) {
        FrameMetrics fm;
        fm.index = int(i) + 1;
        fm.role = c.frames[i].role == container::kKey ? "key" : "wz";
        fm.bits = double(c.frames[i].payload_bytes()) * 8;
        fm.psnr = psnr(ref.frames[i].pixels, dec.frames[i].pixels);
        fm.msssim = ms_ssim(ref.frames[i].pixels, dec.frames[i].pixels);
        r.avg_psnr += fm.psnr;
        r.avg_msssim += fm.msssim;
        r.frames.push_back(fm);
    }
    r.avg_psnr /= double(ref.count());
    r.avg_msssim /= double(ref.count());
    r.avg_msssim_db = msssim_db(r.avg_msssim);
    return r;
}

void write_json(const EvalReport& r, const std::string& path) {
    nlohmann::json j{{"width", r.width},       {"height", r.height},
                     {"bpp", r.bpp},           {"avg_psnr", r.avg_psnr},
                     {"avg_msssim", r.avg_msssim}, {"avg_msssim_db", r.avg_msssim_db}};
    j["frames"] = nlohmann::json::array();
    for (auto& f : r.frames)
        j["frames"].push_back({{"index", f.index},
                               {"role", f.role},
                               {"bits", f.bits},
                               {"psnr", f.psnr},
                               {"msssim", f.msssim}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

void write_csv(const EvalReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "index,role,bits,psnr,msssim\n";
    for (auto& f : r.frames)
        out << f.index << "," << f.role << "," << f.bits << "," << f.psnr << "," << f.msssim
            << "\n";
}

void write_svg(const std::map<std::string, std::vector<RdPoint>>& curves,
               const std::string& path) {
    double rlo = 1e300, rhi = -1e300, qlo = 1e300, qhi = -1e300;
    for (auto& [name, pts] : curves)
        for (auto& p : pts) {
            rlo = std::min(rlo, p.rate);
            rhi = std::max(rhi, p.rate);
            qlo = std::min(qlo, p.quality);
            qhi = std::max(qhi, p.quality);
        }
    if (rhi <= rlo) rhi = rlo + 1;
    if (qhi <= qlo) qhi = qlo + 1;
    const int w = 640, h = 480, margin = 50;
    auto px = [&](double r) { return margin + (r - rlo) / (rhi - rlo) * (w - 2 * margin); };
    auto py = [&](double q) { return h - margin - (q - qlo) / (qhi - qlo) * (h - 2 * margin); };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
        << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << h - margin << "\" stroke=\"black\"/>\n";
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    int ci = 0;
    for (auto& [name, pts] : curves) {
        auto sorted = pts;
        std::sort(sorted.begin(), sorted.end(),
                  [](const RdPoint& a, const RdPoint& b) { return a.rate < b.rate; });
        out << "<polyline fill=\"none\" stroke=\"" << colors[ci % 5] << "\" points=\"";
        for (auto& p : sorted) out << px(p.rate) << "," << py(p.quality) << " ";
        out << "\"/>\n";
        for (auto& p : sorted)
            out << "<circle cx=\"" << px(p.rate) << "\" cy=\"" << py(p.quality)
                << "\" r=\"3\" fill=\"" << colors[ci % 5] << "\"/>\n";
        out << "<text x=\"" << w - margin - 120 << "\" y=\"" << margin + 16 * (ci + 1)
            << "\" fill=\"" << colors[ci % 5] << "\">" << name << "</text>\n";
        ++ci;
    }
    out << "<text x=\"" << w / 2 - 20 << "\" y=\"" << h - 12 << "\">rate</text>\n";
    out << "<text x=\"12\" y=\"" << h / 2 << "\" transform=\"rotate(-90 12," << h / 2
        << ")\">quality</text>\n</svg>\n";
}

// ------------------------------------------------------------ complexity

ComplexityReport profile(const DeepModel& m, const VideoSequence& seq, int gop_size,
                         int runs) {
    if (runs < 1) throw std::invalid_argument("profile: runs must be >= 1");
    ComplexityReport r;
    auto median = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    using Clock = std::chrono::steady_clock;
    prof::enable(true);
    prof::reset();
    container::Container c;
    std::vector<double> enc_ms, dec_ms;
    for (int i = 0; i < runs; ++i) {
        if (i == 1) prof::enable(false);  // count FLOPs once, time every run
        auto t0 = Clock::now();
        c = deep_encode(m, seq, gop_size);
        enc_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
    prof::enable(true);
    auto enc = prof::snapshot();
    prof::reset();
    for (int i = 0; i < runs; ++i) {
        if (i == 1) prof::enable(false);
        auto t0 = Clock::now();
        deep_decode(m, c);
        dec_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
    prof::enable(true);
    auto dec = prof::snapshot();
    prof::enable(false);
    r.encoder_ms = median(enc_ms);
    r.decoder_ms = median(dec_ms);
    r.encoder_flops = enc.flops_by_stage;
    r.decoder_flops = dec.flops_by_stage;
    r.encoder_total = enc.total();
    r.decoder_total = dec.total();
    r.encoder_si_gen_calls = enc.si_gen_calls;
    r.decoder_si_gen_calls = dec.si_gen_calls;
    return r;
}

std::vector<std::string> visualize_latents(const Tensor& latent, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> paths;
    for (int ch = 0; ch < latent.c; ++ch) {
        const float* p = latent.plane(ch);
        const size_t n = size_t(latent.h) * latent.w;
        float mn = p[0], mx = p[0];
        for (size_t i = 0; i < n; ++i) {
            mn = std::min(mn, p[i]);
            mx = std::max(mx, p[i]);
        }
        png::Image img;
        img.width = latent.w;
        img.height = latent.h;
        img.channels = 1;
        img.pixels.resize(n);
        for (size_t i = 0; i < n; ++i) {
            double v = mx - mn < 1e-12 ? 0.5 : (double(p[i]) - mn) / (mx - mn);
            img.pixels[i] = uint8_t(std::lround(v * 255.0));
        }
        char name[32];
        std::snprintf(name, sizeof(name), "channel_%03d.png", ch);
        std::string path = dir + "/" + name;
        png::write(path, img);
        paths.push_back(path);
    }
    return paths;
}

}  // namespace ddvc::eval
