#include "ddvc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ddvc::kern {

namespace {
Impl g_impl = Impl::omp;
int g_threads = [] {
    if (const char* s = std::getenv("DDVC_THREADS")) {
        int n = std::atoi(s);
        if (n >= 1) return n;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}();
}  // namespace

void set_impl(Impl impl) { g_impl = impl; }
Impl impl() { return g_impl; }
void set_threads(int n) { g_threads = std::max(1, n); }
int threads() { return g_threads; }

// ---------------------------------------------------------------- conv2d

static inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

static inline float conv_pixel(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                               int pad, int k, int co, int oy, int ox) {
    float acc = b.v.empty() ? 0.f : b.v[co];
    for (int ci = 0; ci < x.c; ++ci) {
        const float* xp = x.plane(ci);
        const float* wp = &w.v[(size_t(co) * w.h + ci) * w.w];
        for (int ky = 0; ky < k; ++ky) {
            int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= x.h) continue;
            const float* row = xp + size_t(iy) * x.w;
            for (int kx = 0; kx < k; ++kx) {
                int ix = ox * stride + kx - pad;
                if (ix < 0 || ix >= x.w) continue;
                acc += row[ix] * wp[ky * k + kx];
            }
        }
    }
    return acc;
}

void conv2d_fwd_serial(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                       Tensor& out) {
    const int k = int(std::lround(std::sqrt(double(w.w))));
    const int oh = conv_out_dim(x.h, k, stride, pad), ow = conv_out_dim(x.w, k, stride, pad);
    out = Tensor(w.c, oh, ow);
    for (int co = 0; co < w.c; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                out.at(co, oy, ox) = conv_pixel(x, w, b, stride, pad, k, co, oy, ox);
}

void conv2d_fwd_omp(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                    Tensor& out) {
    const int k = int(std::lround(std::sqrt(double(w.w))));
    const int oh = conv_out_dim(x.h, k, stride, pad), ow = conv_out_dim(x.w, k, stride, pad);
    out = Tensor(w.c, oh, ow);
#pragma omp parallel for schedule(static) num_threads(g_threads)
    for (int co = 0; co < w.c; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                out.at(co, oy, ox) = conv_pixel(x, w, b, stride, pad, k, co, oy, ox);
}

void conv2d_fwd(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                Tensor& out) {
    if (g_impl == Impl::serial)
        conv2d_fwd_serial(x, w, b, stride, pad, out);
    else
        conv2d_fwd_omp(x, w, b, stride, pad, out);
}

void conv2d_bwd_input(const Tensor& gout, const Tensor& w, int stride, int pad, Tensor& gin) {
    // gin shape must be preset by the caller (c/h/w fields).
    const int k = int(std::lround(std::sqrt(double(w.w))));
    const int ci_n = w.h;
    gin.v.assign(size_t(gin.c) * gin.h * gin.w, 0.f);
    const bool par = g_impl == Impl::omp;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (par)
    for (int ci = 0; ci < ci_n; ++ci) {
        for (int iy = 0; iy < gin.h; ++iy)
            for (int ix = 0; ix < gin.w; ++ix) {
                float acc = 0.f;
                for (int co = 0; co < gout.c; ++co) {
                    const float* gp = gout.plane(co);
                    const float* wp = &w.v[(size_t(co) * w.h + ci) * w.w];
                    for (int ky = 0; ky < k; ++ky) {
                        int t = iy - ky + pad;
                        if (t < 0 || t % stride) continue;
                        int oy = t / stride;
                        if (oy >= gout.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int u = ix - kx + pad;
                            if (u < 0 || u % stride) continue;
                            int ox = u / stride;
                            if (ox >= gout.w) continue;
                            acc += gp[size_t(oy) * gout.w + ox] * wp[ky * k + kx];
                        }
                    }
                }
                gin.at(ci, iy, ix) = acc;
            }
    }
}

void conv2d_bwd_weight(const Tensor& x, const Tensor& gout, int stride, int pad, Tensor& gw,
                       Tensor& gb) {
    const int k = int(std::lround(std::sqrt(double(gw.w))));
    gw.v.assign(gw.size(), 0.f);
    gb.v.assign(gb.size(), 0.f);
    const bool par = g_impl == Impl::omp;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (par)
    for (int co = 0; co < gout.c; ++co) {
        const float* gp = gout.plane(co);
        float bacc = 0.f;
        for (size_t i = 0; i < size_t(gout.h) * gout.w; ++i) bacc += gp[i];
        gb.v[co] = bacc;
        for (int ci = 0; ci < x.c; ++ci) {
            const float* xp = x.plane(ci);
            float* wp = &gw.v[(size_t(co) * gw.h + ci) * gw.w];
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    float acc = 0.f;
                    for (int oy = 0; oy < gout.h; ++oy) {
                        int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int ox = 0; ox < gout.w; ++ox) {
                            int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= x.w) continue;
                            acc += gp[size_t(oy) * gout.w + ox] * xp[size_t(iy) * x.w + ix];
                        }
                    }
                    wp[ky * k + kx] = acc;
                }
        }
    }
}

// ---------------------------------------------------------------- deconv2d

static inline float deconv_pixel(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                                 int pad, int k, int co, int oy, int ox) {
    float acc = b.v.empty() ? 0.f : b.v[co];
    for (int ci = 0; ci < x.c; ++ci) {
        const float* xp = x.plane(ci);
        const float* wp = &w.v[(size_t(ci) * w.h + co) * w.w];
        for (int ky = 0; ky < k; ++ky) {
            int t = oy + pad - ky;
            if (t < 0 || t % stride) continue;
            int iy = t / stride;
            if (iy >= x.h) continue;
            const float* row = xp + size_t(iy) * x.w;
            for (int kx = 0; kx < k; ++kx) {
                int u = ox + pad - kx;
                if (u < 0 || u % stride) continue;
                int ix = u / stride;
                if (ix >= x.w) continue;
                acc += row[ix] * wp[ky * k + kx];
            }
        }
    }
    return acc;
}

void deconv2d_fwd_serial(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                         int outpad, Tensor& out) {
    const int k = int(std::lround(std::sqrt(double(w.w))));
    const int oh = (x.h - 1) * stride - 2 * pad + k + outpad;
    const int ow = (x.w - 1) * stride - 2 * pad + k + outpad;
    out = Tensor(w.h, oh, ow);
    for (int co = 0; co < out.c; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                out.at(co, oy, ox) = deconv_pixel(x, w, b, stride, pad, k, co, oy, ox);
}

void deconv2d_fwd_omp(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                      int outpad, Tensor& out) {
    const int k = int(std::lround(std::sqrt(double(w.w))));
    const int oh = (x.h - 1) * stride - 2 * pad + k + outpad;
    const int ow = (x.w - 1) * stride - 2 * pad + k + outpad;
    out = Tensor(w.h, oh, ow);
#pragma omp parallel for schedule(static) num_threads(g_threads)
    for (int co = 0; co < out.c; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                out.at(co, oy, ox) = deconv_pixel(x, w, b, stride, pad, k, co, oy, ox);
}

void deconv2d_fwd(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                  int outpad, Tensor& out) {
    if (g_impl == Impl::serial)
        deconv2d_fwd_serial(x, w, b, stride, pad, outpad, out);
    else
        deconv2d_fwd_omp(x, w, b, stride, pad, outpad, out);
}

void deconv2d_bwd_input(const Tensor& gout, const Tensor& w, int stride, int pad, int outpad,
                        Tensor& gin) {
    (void)outpad;
    const int k = int(std::lround(std::sqrt(double(w.w))));
    gin.v.assign(size_t(gin.c) * gin.h * gin.w, 0.f);
    const bool par = g_impl == Impl::omp;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (par)
    for (int ci = 0; ci < gin.c; ++ci) {
        for (int iy = 0; iy < gin.h; ++iy)
            for (int ix = 0; ix < gin.w; ++ix) {
                float acc = 0.f;
                for (int co = 0; co < gout.c; ++co) {
                    const float* gp = gout.plane(co);
                    const float* wp = &w.v[(size_t(ci) * w.h + co) * w.w];
                    for (int ky = 0; ky < k; ++ky) {
                        int oy = iy * stride - pad + ky;
                        if (oy < 0 || oy >= gout.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ox = ix * stride - pad + kx;
                            if (ox < 0 || ox >= gout.w) continue;
                            acc += gp[size_t(oy) * gout.w + ox] * wp[ky * k + kx];
                        }
                    }
                }
                gin.at(ci, iy, ix) = acc;
            }
    }
}

void deconv2d_bwd_weight(const Tensor& x, const Tensor& gout, int stride, int pad, int outpad,
                         Tensor& gw, Tensor& gb) {
    (void)outpad;
    const int k = int(std::lround(std::sqrt(double(gw.w))));
    gw.v.assign(gw.size(), 0.f);
    gb.v.assign(gb.size(), 0.f);
    for (int co = 0; co < gout.c; ++co) {
        const float* gp = gout.plane(co);
        float bacc = 0.f;
        for (size_t i = 0; i < size_t(gout.h) * gout.w; ++i) bacc += gp[i];
        gb.v[co] = bacc;
    }
    const bool par = g_impl == Impl::omp;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (par)
    for (int ci = 0; ci < x.c; ++ci) {
        const float* xp = x.plane(ci);
        for (int co = 0; co < gout.c; ++co) {
            const float* gp = gout.plane(co);
            float* wp = &gw.v[(size_t(ci) * gw.h + co) * gw.w];
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    float acc = 0.f;
                    for (int iy = 0; iy < x.h; ++iy) {
                        int oy = iy * stride - pad + ky;
                        if (oy < 0 || oy >= gout.h) continue;
                        for (int ix = 0; ix < x.w; ++ix) {
                            int ox = ix * stride - pad + kx;
                            if (ox < 0 || ox >= gout.w) continue;
                            acc += xp[size_t(iy) * x.w + ix] * gp[size_t(oy) * gout.w + ox];
                        }
                    }
                    wp[ky * k + kx] = acc;
                }
        }
    }
}

// ---------------------------------------------------------------- GDN

void gdn_fwd(const Tensor& x, const Tensor& braw, const Tensor& graw, bool inverse, Tensor& out) {
    const int C = x.c;
    out = Tensor(C, x.h, x.w);
    const size_t np = size_t(x.h) * x.w;
    const bool par = g_impl == Impl::omp;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (par)
    for (int i = 0; i < C; ++i) {
        const float beta = 1e-6f + braw.v[i] * braw.v[i];
        const float* gi = &graw.v[size_t(i) * C];
        float* op = out.plane(i);
        const float* xi = x.plane(i);
        for (size_t p = 0; p < np; ++p) {
            float d = beta;
            for (int j = 0; j < C; ++j) {
                float xj = x.v[size_t(j) * np + p];
                d += gi[j] * gi[j] * xj * xj;
            }
            float r = std::sqrt(d);
            op[p] = inverse ? xi[p] * r : xi[p] / r;
        }
    }
}

void gdn_bwd(const Tensor& x, const Tensor& braw, const Tensor& graw, bool inverse,
             const Tensor& gout, Tensor& gx, Tensor& gbraw, Tensor& ggraw) {
    const int C = x.c;
    const size_t np = size_t(x.h) * x.w;
    const float alpha = inverse ? 0.5f : -0.5f;
    gx = Tensor(C, x.h, x.w);
    gbraw = Tensor(braw.c, braw.h, braw.w);
    ggraw = Tensor(graw.c, graw.h, graw.w);
    std::vector<float> gbeta(C, 0.f), ggamma(size_t(C) * C, 0.f);
    std::vector<float> d(C), e(C);
    for (size_t p = 0; p < np; ++p) {
        for (int i = 0; i < C; ++i) {
            float acc = 1e-6f + braw.v[i] * braw.v[i];
            const float* gi = &graw.v[size_t(i) * C];
            for (int j = 0; j < C; ++j) {
                float xj = x.v[size_t(j) * np + p];
                acc += gi[j] * gi[j] * xj * xj;
            }
            d[i] = acc;
            float gxi = gout.v[size_t(i) * np + p] * x.v[size_t(i) * np + p];
            e[i] = gxi * alpha * std::pow(acc, alpha - 1.f);
            gbeta[i] += e[i];
        }
        for (int k = 0; k < C; ++k) {
            float xk = x.v[size_t(k) * np + p];
            float acc = gout.v[size_t(k) * np + p] * std::pow(d[k], alpha);
            for (int i = 0; i < C; ++i) {
                float gamma_ik = graw.v[size_t(i) * C + k] * graw.v[size_t(i) * C + k];
                acc += 2.f * xk * e[i] * gamma_ik;
                ggamma[size_t(i) * C + k] += e[i] * xk * xk;
            }
            gx.v[size_t(k) * np + p] = acc;
        }
    }
    for (int i = 0; i < C; ++i) gbraw.v[i] = gbeta[i] * 2.f * braw.v[i];
    for (size_t i = 0; i < ggraw.size(); ++i) ggraw.v[i] = ggamma[i] * 2.f * graw.v[i];
}

// ---------------------------------------------------------------- warp

static inline void sample_setup(float s, int n, int& i0, int& i1, float& frac, bool& clamped) {
    clamped = s < 0.f || s > float(n - 1);
    float cs = std::clamp(s, 0.f, float(n - 1));
    i0 = int(std::floor(cs));
    if (i0 > n - 1) i0 = n - 1;
    i1 = std::min(i0 + 1, n - 1);
    frac = cs - float(i0);
}

void warp_fwd_serial(const Tensor& img, const Tensor& flow, Tensor& out) {
    out = Tensor(img.c, img.h, img.w);
    for (int ci = 0; ci < img.c; ++ci)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                float sx = x + flow.at(0, y, x), sy = y + flow.at(1, y, x);
                int x0, x1, y0, y1;
                float fx, fy;
                bool cx, cy;
                sample_setup(sx, img.w, x0, x1, fx, cx);
                sample_setup(sy, img.h, y0, y1, fy, cy);
                float v = (1 - fy) * ((1 - fx) * img.at(ci, y0, x0) + fx * img.at(ci, y0, x1)) +
                          fy * ((1 - fx) * img.at(ci, y1, x0) + fx * img.at(ci, y1, x1));
                out.at(ci, y, x) = v;
            }
}

void warp_fwd_omp(const Tensor& img, const Tensor& flow, Tensor& out) {
    out = Tensor(img.c, img.h, img.w);
#pragma omp parallel for schedule(static) num_threads(g_threads)
    for (int ci = 0; ci < img.c; ++ci)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                float sx = x + flow.at(0, y, x), sy = y + flow.at(1, y, x);
                int x0, x1, y0, y1;
                float fx, fy;
                bool cx, cy;
                sample_setup(sx, img.w, x0, x1, fx, cx);
                sample_setup(sy, img.h, y0, y1, fy, cy);
                float v = (1 - fy) * ((1 - fx) * img.at(ci, y0, x0) + fx * img.at(ci, y0, x1)) +
                          fy * ((1 - fx) * img.at(ci, y1, x0) + fx * img.at(ci, y1, x1));
                out.at(ci, y, x) = v;
            }
}

void warp_fwd(const Tensor& img, const Tensor& flow, Tensor& out) {
    if (g_impl == Impl::serial)
        warp_fwd_serial(img, flow, out);
    else
        warp_fwd_omp(img, flow, out);
}

void warp_bwd(const Tensor& img, const Tensor& flow, const Tensor& gout, Tensor& gimg,
              Tensor& gflow) {
    gimg = Tensor(img.c, img.h, img.w);
    gflow = Tensor(2, img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            float sx = x + flow.at(0, y, x), sy = y + flow.at(1, y, x);
            int x0, x1, y0, y1;
            float fx, fy;
            bool cx, cy;
            sample_setup(sx, img.w, x0, x1, fx, cx);
            sample_setup(sy, img.h, y0, y1, fy, cy);
            float gfx = 0.f, gfy = 0.f;
            for (int ci = 0; ci < img.c; ++ci) {
                float g = gout.at(ci, y, x);
                gimg.at(ci, y0, x0) += g * (1 - fy) * (1 - fx);
                gimg.at(ci, y0, x1) += g * (1 - fy) * fx;
                gimg.at(ci, y1, x0) += g * fy * (1 - fx);
                gimg.at(ci, y1, x1) += g * fy * fx;
                if (!cx)
                    gfx += g * ((1 - fy) * (img.at(ci, y0, x1) - img.at(ci, y0, x0)) +
                                fy * (img.at(ci, y1, x1) - img.at(ci, y1, x0)));
                if (!cy)
                    gfy += g * ((1 - fx) * (img.at(ci, y1, x0) - img.at(ci, y0, x0)) +
                                fx * (img.at(ci, y1, x1) - img.at(ci, y0, x1)));
            }
            gflow.at(0, y, x) = gfx;
            gflow.at(1, y, x) = gfy;
        }
}

// ---------------------------------------------------------------- resize

void resize_bilinear_fwd(const Tensor& x, int oh, int ow, Tensor& out) {
    out = Tensor(x.c, oh, ow);
    const float sy = float(x.h) / oh, sx = float(x.w) / ow;
    const bool par = g_impl == Impl::omp;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (par)
    for (int ci = 0; ci < x.c; ++ci)
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx) {
                float srcy = (y + 0.5f) * sy - 0.5f, srcx = (xx + 0.5f) * sx - 0.5f;
                int x0, x1, y0, y1;
                float fx, fy;
                bool c;
                sample_setup(srcx, x.w, x0, x1, fx, c);
                sample_setup(srcy, x.h, y0, y1, fy, c);
                out.at(ci, y, xx) =
                    (1 - fy) * ((1 - fx) * x.at(ci, y0, x0) + fx * x.at(ci, y0, x1)) +
                    fy * ((1 - fx) * x.at(ci, y1, x0) + fx * x.at(ci, y1, x1));
            }
}

void resize_bilinear_bwd(const Tensor& gout, int ih, int iw, Tensor& gin) {
    gin = Tensor(gout.c, ih, iw);
    const float sy = float(ih) / gout.h, sx = float(iw) / gout.w;
    const bool par = g_impl == Impl::omp;
#pragma omp parallel for schedule(static) num_threads(g_threads) if (par)
    for (int ci = 0; ci < gout.c; ++ci)
        for (int y = 0; y < gout.h; ++y)
            for (int xx = 0; xx < gout.w; ++xx) {
                float srcy = (y + 0.5f) * sy - 0.5f, srcx = (xx + 0.5f) * sx - 0.5f;
                int x0, x1, y0, y1;
                float fx, fy;
                bool c;
                sample_setup(srcx, iw, x0, x1, fx, c);
                sample_setup(srcy, ih, y0, y1, fy, c);
                float g = gout.at(ci, y, xx);
                gin.at(ci, y0, x0) += g * (1 - fy) * (1 - fx);
                gin.at(ci, y0, x1) += g * (1 - fy) * fx;
                gin.at(ci, y1, x0) += g * fy * (1 - fx);
                gin.at(ci, y1, x1) += g * fy * fx;
            }
}

void avgpool2_fwd(const Tensor& x, Tensor& out) {
    out = Tensor(x.c, x.h / 2, x.w / 2);
    for (int ci = 0; ci < x.c; ++ci)
        for (int y = 0; y < out.h; ++y)
            for (int xx = 0; xx < out.w; ++xx)
                out.at(ci, y, xx) = 0.25f * (x.at(ci, 2 * y, 2 * xx) + x.at(ci, 2 * y, 2 * xx + 1) +
                                             x.at(ci, 2 * y + 1, 2 * xx) +
                                             x.at(ci, 2 * y + 1, 2 * xx + 1));
}

void avgpool2_bwd(const Tensor& gout, Tensor& gin) {
    gin = Tensor(gout.c, gout.h * 2, gout.w * 2);
    for (int ci = 0; ci < gout.c; ++ci)
        for (int y = 0; y < gout.h; ++y)
            for (int xx = 0; xx < gout.w; ++xx) {
                float g = 0.25f * gout.at(ci, y, xx);
                gin.at(ci, 2 * y, 2 * xx) = g;
                gin.at(ci, 2 * y, 2 * xx + 1) = g;
                gin.at(ci, 2 * y + 1, 2 * xx) = g;
                gin.at(ci, 2 * y + 1, 2 * xx + 1) = g;
            }
}

}  // namespace ddvc::kern
