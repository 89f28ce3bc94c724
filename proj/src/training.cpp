#include "ddvc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace ddvc::train {

// ----------------------------------------------------------------- config

TrainConfig TrainConfig::for_stage(int stage) {
    TrainConfig c;
    c.stage = stage;
    c.patience = stage == 1 ? 10 : 5;
    c.max_epochs = stage == 1 ? 100 : 50;
    return c;
}

void TrainConfig::validate() const {
    if (stage != 1 && stage != 2) throw std::invalid_argument("train: stage must be 1 or 2");
    if (metric != "mse" && metric != "msssim")
        throw std::invalid_argument("train: metric must be mse or msssim");
    if (!custom_lambda) {
        const double* grid = metric == "mse" ? kLambdaGridMse : kLambdaGridMsssim;
        bool on_grid = false;
        for (int i = 0; i < 5; ++i)
            if (std::fabs(lambda - grid[i]) < 1e-9 * std::max(1.0, grid[i])) on_grid = true;
        if (!on_grid)
            throw std::invalid_argument(
                "train: lambda " + std::to_string(lambda) +
                " is not on the published grid; set custom_lambda to override");
    }
    if (lambda < 0) throw std::invalid_argument("train: lambda must be nonnegative");
    if (lr <= 0 || batch < 1 || max_epochs < 1 || patience < 1 || plateau_factor <= 1)
        throw std::invalid_argument("train: bad schedule parameters");
    if (crop < 64 || crop % 64) throw std::invalid_argument("train: crop must be a multiple of 64");
}

// ------------------------------------------------------- synthetic dataset

static Tensor make_canvas(int cs, std::mt19937& rng) {
    std::uniform_real_distribution<float> u(0.f, 1.f);
    struct Grating {
        float fx, fy, phase, amp;
    };
    std::vector<Grating> gratings;
    for (int i = 0; i < 6; ++i)
        gratings.push_back({u(rng) * 0.5f + 0.03f, u(rng) * 0.5f + 0.03f, u(rng) * 6.2832f,
                            u(rng) * 0.12f + 0.03f});
    struct Disc {
        float cx, cy, r, amp[3];
    };
    std::vector<Disc> discs;
    for (int i = 0; i < 4; ++i)
        discs.push_back({u(rng) * cs, u(rng) * cs, u(rng) * 0.15f * cs + 4.f,
                         {u(rng) * 0.5f - 0.25f, u(rng) * 0.5f - 0.25f, u(rng) * 0.5f - 0.25f}});
    float tint[3] = {u(rng) * 0.1f - 0.05f, u(rng) * 0.1f - 0.05f, u(rng) * 0.1f - 0.05f};

    Tensor t(3, cs, cs);
    for (int y = 0; y < cs; ++y)
        for (int x = 0; x < cs; ++x) {
            float base = 0.5f;
            for (auto& g : gratings) base += g.amp * std::sin(g.fx * x + g.fy * y + g.phase);
            for (int ch = 0; ch < 3; ++ch) {
                float v = base + tint[ch];
                for (auto& d : discs) {
                    float dx = x - d.cx, dy = y - d.cy;
                    v += d.amp[ch] * std::exp(-(dx * dx + dy * dy) / (d.r * d.r));
                }
                t.at(ch, y, x) = std::clamp(v, 0.f, 1.f);
            }
        }
    return t;
}

static Tensor crop_at(const Tensor& canvas, int y0, int x0, int size) {
    Tensor out(3, size, size);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) out.at(ch, y, x) = canvas.at(ch, y0 + y, x0 + x);
    return out;
}

// samples the canvas at an affine map of the output grid (bilinear, clamped)
template <typename MapFn>
static Tensor warp_crop(const Tensor& canvas, int pad, int size, MapFn map) {
    Tensor out(3, size, size);
    int cs = canvas.h;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            auto [sy, sx] = map(float(y), float(x));
            sy += pad;
            sx += pad;
            sy = std::clamp(sy, 0.f, float(cs - 1));
            sx = std::clamp(sx, 0.f, float(cs - 1));
            int iy = std::min(int(sy), cs - 2), ix = std::min(int(sx), cs - 2);
            float fy = sy - iy, fx = sx - ix;
            for (int ch = 0; ch < 3; ++ch) {
                float v00 = canvas.at(ch, iy, ix), v01 = canvas.at(ch, iy, ix + 1);
                float v10 = canvas.at(ch, iy + 1, ix), v11 = canvas.at(ch, iy + 1, ix + 1);
                out.at(ch, y, x) = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                   fy * ((1 - fx) * v10 + fx * v11);
            }
        }
    return out;
}

Dataset make_synthetic_dataset(int n, int size, const std::string& motion, uint32_t seed) {
    if (size <= 0 || size % 64)
        throw std::invalid_argument("dataset: size must be a positive multiple of 64");
    if (motion != "translate" && motion != "rotate" && motion != "zoom")
        throw std::invalid_argument("dataset: unknown motion mode " + motion);
    std::mt19937 rng(seed);
    const int pad = 8;
    const int cs = size + 2 * pad;
    const float cx = size / 2.f - 0.5f;
    Dataset out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        Tensor canvas = make_canvas(cs, rng);
        Triplet tr;
        if (motion == "translate") {
            std::uniform_int_distribution<int> sh(-3, 3);
            int dx = 0, dy = 0;
            while (dx == 0 && dy == 0) {
                dx = sh(rng);
                dy = sh(rng);
            }
            tr.ref0 = crop_at(canvas, pad - dy, pad - dx, size);
            tr.target = crop_at(canvas, pad, pad, size);
            tr.ref1 = crop_at(canvas, pad + dy, pad + dx, size);
        } else if (motion == "rotate") {
            std::uniform_real_distribution<float> au(0.02f, 0.06f);
            float th = au(rng) * (rng() & 1 ? 1.f : -1.f);
            for (int k = -1; k <= 1; ++k) {
                float a = th * k, ca = std::cos(a), sa = std::sin(a);
                Tensor f = warp_crop(canvas, pad, size, [&](float y, float x) {
                    float ry = y - cx, rx = x - cx;
                    return std::pair<float, float>{cx + ca * ry - sa * rx,
                                                   cx + sa * ry + ca * rx};
                });
                (k < 0 ? tr.ref0 : k == 0 ? tr.target : tr.ref1) = std::move(f);
            }
        } else {  // zoom
            std::uniform_real_distribution<float> zu(1.01f, 1.03f);
            float z = zu(rng);
            for (int k = -1; k <= 1; ++k) {
                float s = std::pow(z, float(k));
                Tensor f = warp_crop(canvas, pad, size, [&](float y, float x) {
                    return std::pair<float, float>{cx + (y - cx) * s, cx + (x - cx) * s};
                });
                (k < 0 ? tr.ref0 : k == 0 ? tr.target : tr.ref1) = std::move(f);
            }
        }
        out.push_back(std::move(tr));
    }
    return out;
}

Dataset load_vimeo_triplets(const std::string& root) {
    throw std::runtime_error(
        "vimeo loader is not wired up at desk scale; expected layout is " + root +
        "/sequences/<a>/<b>/im1.png im2.png im3.png (one triplet per leaf directory)");
}

// ------------------------------------------------- differentiable MS-SSIM

static ag::Var ewdiv(const ag::Var& a, const ag::Var& b) {
    Tensor val(a->val.c, a->val.h, a->val.w);
    for (size_t i = 0; i < val.size(); ++i) val.v[i] = a->val.v[i] / b->val.v[i];
    return ag::make_node(std::move(val), {a, b}, [](ag::Node& n) {
        auto& a = *n.parents[0];
        auto& b = *n.parents[1];
        if (a.req) {
            a.ensure_grad();
            for (size_t i = 0; i < n.val.size(); ++i) a.grad.v[i] += n.grad.v[i] / b.val.v[i];
        }
        if (b.req) {
            b.ensure_grad();
            for (size_t i = 0; i < n.val.size(); ++i)
                b.grad.v[i] -= n.grad.v[i] * a.val.v[i] / (b.val.v[i] * b.val.v[i]);
        }
    });
}

static ag::Var pow_const(const ag::Var& x, float p) {
    Tensor val(x->val.c, x->val.h, x->val.w);
    for (size_t i = 0; i < val.size(); ++i) val.v[i] = std::pow(std::max(x->val.v[i], 1e-12f), p);
    return ag::make_node(std::move(val), {x}, [p](ag::Node& n) {
        auto& x = *n.parents[0];
        if (!x.req) return;
        x.ensure_grad();
        for (size_t i = 0; i < n.val.size(); ++i) {
            float xv = std::max(x.val.v[i], 1e-12f);
            x.grad.v[i] += n.grad.v[i] * p * std::pow(xv, p - 1.f);
        }
    });
}

static ag::Var mean(const ag::Var& x) {
    return ag::mul_scalar(ag::sum(x), 1.f / float(x->val.size()));
}

static ag::Var gauss_blur(const ag::Var& x) {
    static const ag::Var kWin = [] {
        Tensor w(1, 1, 121);
        double sum = 0;
        for (int i = 0; i < 11; ++i)
            for (int j = 0; j < 11; ++j) {
                double dy = i - 5.0, dx = j - 5.0;
                double g = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
                w.v[size_t(i) * 11 + j] = float(g);
                sum += g;
            }
        for (auto& v : w.v) v = float(v / sum);
        return ag::constant(std::move(w));
    }();
    static const ag::Var kZeroBias = [] {
        Tensor b(1, 1, 1);
        b.fill(0.f);
        return ag::constant(std::move(b));
    }();
    return ag::conv2d(x, kWin, kZeroBias, 1, 0);  // valid mode
}

ag::Var ms_ssim_var(const ag::Var& a, const ag::Var& b) {
    const auto& ta = a->val;
    if (ta.c != b->val.c || ta.h != b->val.h || ta.w != b->val.w)
        throw std::invalid_argument("ms_ssim: shape mismatch");
    if (std::min(ta.h, ta.w) < 11) throw std::invalid_argument("ms_ssim: image under 11 px");
    static const float kW[5] = {0.0448f, 0.2856f, 0.3001f, 0.2363f, 0.1333f};
    int scales = 5;
    while (scales > 1 && (std::min(ta.h, ta.w) >> (scales - 1)) < 11) --scales;
    float wsum = 0;
    for (int s = 0; s < scales; ++s) wsum += kW[s];
    const float c1 = 1e-4f, c2 = 9e-4f;

    ag::Var total;
    for (int ch = 0; ch < ta.c; ++ch) {
        ag::Var xa = ag::slice_c(a, ch, ch + 1);
        ag::Var xb = ag::slice_c(b, ch, ch + 1);
        ag::Var acc;
        for (int s = 0; s < scales; ++s) {
            auto ma = gauss_blur(xa), mb = gauss_blur(xb);
            auto saa = ag::sub(gauss_blur(ag::mul(xa, xa)), ag::mul(ma, ma));
            auto sbb = ag::sub(gauss_blur(ag::mul(xb, xb)), ag::mul(mb, mb));
            auto sab = ag::sub(gauss_blur(ag::mul(xa, xb)), ag::mul(ma, mb));
            auto l = ewdiv(ag::add_scalar(ag::mul_scalar(ag::mul(ma, mb), 2.f), c1),
                           ag::add_scalar(ag::add(ag::mul(ma, ma), ag::mul(mb, mb)), c1));
            auto cs = ewdiv(ag::add_scalar(ag::mul_scalar(sab, 2.f), c2),
                            ag::add_scalar(ag::add(saa, sbb), c2));
            auto lm = mean(l);
            auto csm = mean(cs);
            ag::Var term = s == scales - 1 ? ag::mul(lm, csm) : csm;
            term = pow_const(term, kW[s] / wsum);
            acc = acc ? ag::mul(acc, term) : term;
            if (s + 1 < scales) {
                xa = ag::avgpool2(xa);
                xb = ag::avgpool2(xb);
            }
        }
        total = total ? ag::add(total, acc) : acc;
    }
    return ag::mul_scalar(total, 1.f / float(ta.c));
}

// ------------------------------------------------------------------ loss

ag::Var rd_loss(const ag::Var& x, const ag::Var& xhat, const ag::Var& bpp_y,
                const ag::Var& bpp_z, const TrainConfig& cfg) {
    for (const auto* r : {&bpp_y, &bpp_z})
        for (float v : (*r)->val.v)
            if (v < 0) throw std::invalid_argument("rd_loss: negative rate");
    ag::Var d = cfg.metric == "mse"
                    ? ag::mse(x, xhat)
                    : ag::add_scalar(ag::mul_scalar(ms_ssim_var(x, xhat), -1.f), 1.f);
    return ag::add(ag::add(ag::mul_scalar(d, float(cfg.lambda)), bpp_y), bpp_z);
}

// training-mode latent coding: noisy rates, STE quantization + LRP recon
static ag::Var code_latent(const EntropyModel& em, const ag::Var& y, std::mt19937& rng,
                           ag::Var& bits_y, ag::Var& bits_z) {
    auto z = em.hyper_encode(y);
    auto zn = ag::add_uniform_noise(z, rng);
    bits_z = em.prior().bits(zn);
    auto feat = em.hyper_decode(zn);
    int S = em.config().s_slices, sc = em.config().slice_channels();
    std::vector<ag::Var> decoded;
    for (int j = 0; j < S; ++j) {
        auto yj = ag::slice_c(y, j * sc, (j + 1) * sc);
        auto p = em.slice_params(feat, decoded, j);
        auto noisy = ag::add_uniform_noise(yj, rng);
        auto rate_j = gaussian_rate(ag::sub(noisy, p.mu), p.sigma);
        bits_y = bits_y ? ag::add(bits_y, rate_j) : rate_j;
        auto q = ag::round_ste(yj, p.mu);
        decoded.push_back(ag::add(q, em.lrp(feat, decoded, p.mu, q, j)));
    }
    return ag::concat(decoded);
}

ag::Var triplet_loss(const DeepModel& m, const Triplet& t, const TrainConfig& cfg,
                     std::mt19937& rng) {
    const Tensor& tg = t.target;
    if (tg.h % 64 || tg.w % 64)
        throw std::invalid_argument("train: frame size must be a multiple of 64");
    float inv_pix = 1.f / float(tg.h * tg.w);

    auto x = ag::constant(tg);
    auto r0 = ag::constant(t.ref0);
    auto r1 = ag::constant(t.ref1);

    ag::Var si;
    if (cfg.zero_si) {
        Tensor zero(3, tg.h, tg.w);
        zero.fill(0.f);
        si = ag::constant(std::move(zero));
    } else {
        si = m.rife.interpolate(r0, r1, 0.5f);
        if (cfg.stage == 1) si = ag::detach(si);
    }

    ag::Var bits_y, bits_z;
    auto yhat = code_latent(m.wz_em, m.wz.enc(x), rng, bits_y, bits_z);
    auto xhat = m.wz.dec(ag::concat({yhat, m.wz.si_enc(si)}));
    auto loss = rd_loss(x, xhat, ag::mul_scalar(bits_y, inv_pix),
                        ag::mul_scalar(bits_z, inv_pix), cfg);

    ag::Var ibits_y, ibits_z;
    auto iyhat = code_latent(m.intra_em, m.intra.enc(r0), rng, ibits_y, ibits_z);
    auto ixhat = m.intra.dec(iyhat);
    auto intra_loss = rd_loss(r0, ixhat, ag::mul_scalar(ibits_y, inv_pix),
                              ag::mul_scalar(ibits_z, inv_pix), cfg);
    return ag::add(loss, intra_loss);
}

std::map<std::string, double> group_grad_norms(const DeepModel& m) {
    std::map<std::string, double> out;
    for (auto& [name, v] : m.ps.all()) {
        std::string group = name.substr(0, name.find('.'));
        double& acc = out[group];
        if (v->grad.size() == v->val.size())
            for (float g : v->grad.v) acc += double(g) * g;
    }
    for (auto& [k, v] : out) v = std::sqrt(v);
    return out;
}

// -------------------------------------------------------------- training

TrainResult train_stage(DeepModel& m, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.size() < 2) throw std::invalid_argument("train: need at least 2 triplets");

    size_t n_val = std::max<size_t>(1, data.size() / 10);
    std::vector<const Triplet*> val, tr;
    for (size_t i = 0; i < data.size(); ++i)
        (i < n_val ? val : tr).push_back(&data[i]);

    std::vector<ag::Var> params;
    for (auto& [name, v] : m.ps.all()) {
        if (cfg.stage == 1 && name.rfind("rife.", 0) == 0) continue;
        params.push_back(v);
    }
    nn::Adam opt(params, cfg.lr);
    std::mt19937 rng(cfg.seed);

    auto val_loss = [&] {
        std::mt19937 vrng(999);  // fixed noise draws keep epochs comparable
        double s = 0;
        for (auto* t : val) s += double(triplet_loss(m, *t, cfg, vrng)->val.v[0]);
        return s / double(val.size());
    };

    TrainResult res;
    double best = std::numeric_limits<double>::infinity();
    std::map<std::string, Tensor> best_weights;
    int stale = 0;
    std::vector<size_t> order(tr.size());
    std::iota(order.begin(), order.end(), size_t(0));

    for (int ep = 0; ep < cfg.max_epochs; ++ep) {
        std::shuffle(order.begin(), order.end(), rng);
        double esum = 0;
        for (size_t i = 0; i < order.size();) {
            opt.zero_grad();
            size_t b = std::min<size_t>(size_t(cfg.batch), order.size() - i);
            for (size_t k = 0; k < b; ++k, ++i) {
                auto loss = triplet_loss(m, *tr[order[i]], cfg, rng);
                double lv = double(loss->val.v[0]);
                if (!std::isfinite(lv))
                    throw std::runtime_error("train: non-finite loss at epoch " +
                                             std::to_string(ep) + ", step " + std::to_string(i) +
                                             " (lr " + std::to_string(opt.lr) + ")");
                esum += lv;
                ag::backward(ag::mul_scalar(loss, 1.f / float(b)));
            }
            opt.step();
        }
        res.train_loss.push_back(esum / double(order.size()));
        double v = val_loss();
        res.val_loss.push_back(v);
        res.lr.push_back(opt.lr);
        if (v < best - 1e-9) {
            best = v;
            res.best_epoch = ep;
            stale = 0;
            best_weights.clear();
            for (auto& [name, var] : m.ps.all()) best_weights[name] = var->val;
        } else if (++stale >= cfg.patience) {
            opt.lr /= cfg.plateau_factor;
            stale = 0;
        }
    }

    for (auto& [name, t] : best_weights) m.ps.set_tensor(name, Tensor(t));
    res.best_val = best;
    if (!cfg.checkpoint_path.empty()) m.save_checkpoint(cfg.checkpoint_path);
    if (!cfg.loss_csv.empty()) {
        std::ofstream f(cfg.loss_csv);
        f << "epoch,train_loss,val_loss,lr\n";
        for (size_t i = 0; i < res.train_loss.size(); ++i)
            f << i << ',' << res.train_loss[i] << ',' << res.val_loss[i] << ',' << res.lr[i]
              << '\n';
    }
    return res;
}

}  // namespace ddvc::train
