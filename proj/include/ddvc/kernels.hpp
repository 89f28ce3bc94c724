#pragma once

#include "ddvc/tensor.hpp"

// Low-level numeric kernels. Every kernel comes in two variants: a plain
// serial reference (`*_serial`) and an OpenMP one (`*_omp`). The OpenMP
// variants only parallelize over independent output elements, so both
// variants produce bit-identical results; the unsuffixed entry points
// dispatch on the configured implementation.
//
// Weight layouts:
//   conv2d:   w = Tensor{c=co, h=ci, w=k*k}, bias = Tensor{co,1,1}
//   deconv2d: w = Tensor{c=ci, h=co, w=k*k}, bias = Tensor{co,1,1}
namespace ddvc::kern {

enum class Impl { serial, omp };

void set_impl(Impl impl);
Impl impl();
void set_threads(int n);  // caps OMP worker count (DDVC_THREADS)
int threads();

// ---- convolution ----
void conv2d_fwd(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                Tensor& out);
void conv2d_bwd_input(const Tensor& gout, const Tensor& w, int stride, int pad, Tensor& gin);
void conv2d_bwd_weight(const Tensor& x, const Tensor& gout, int stride, int pad, Tensor& gw,
                       Tensor& gb);

void conv2d_fwd_serial(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                       Tensor& out);
void conv2d_fwd_omp(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                    Tensor& out);

// ---- transposed convolution (out = (in-1)*stride - 2*pad + k + outpad) ----
void deconv2d_fwd(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                  int outpad, Tensor& out);
void deconv2d_bwd_input(const Tensor& gout, const Tensor& w, int stride, int pad, int outpad,
                        Tensor& gin);
void deconv2d_bwd_weight(const Tensor& x, const Tensor& gout, int stride, int pad, int outpad,
                         Tensor& gw, Tensor& gb);

void deconv2d_fwd_serial(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                         int outpad, Tensor& out);
void deconv2d_fwd_omp(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                      int outpad, Tensor& out);

// ---- GDN / IGDN (raw params, beta = 1e-6 + braw^2, gamma = graw^2) ----
void gdn_fwd(const Tensor& x, const Tensor& braw, const Tensor& graw, bool inverse, Tensor& out);
void gdn_bwd(const Tensor& x, const Tensor& braw, const Tensor& graw, bool inverse,
             const Tensor& gout, Tensor& gx, Tensor& gbraw, Tensor& ggraw);

// ---- bilinear backward warp, clamp-to-edge ----
void warp_fwd(const Tensor& img, const Tensor& flow, Tensor& out);
void warp_bwd(const Tensor& img, const Tensor& flow, const Tensor& gout, Tensor& gimg,
              Tensor& gflow);

void warp_fwd_serial(const Tensor& img, const Tensor& flow, Tensor& out);
void warp_fwd_omp(const Tensor& img, const Tensor& flow, Tensor& out);

// ---- resampling ----
void resize_bilinear_fwd(const Tensor& x, int oh, int ow, Tensor& out);
void resize_bilinear_bwd(const Tensor& gout, int ih, int iw, Tensor& gin);
void avgpool2_fwd(const Tensor& x, Tensor& out);
void avgpool2_bwd(const Tensor& gout, Tensor& gin);

}  // namespace ddvc::kern
