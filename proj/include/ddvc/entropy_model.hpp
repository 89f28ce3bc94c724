#pragma once

#include <string>
#include <vector>

#include "ddvc/codec_config.hpp"
#include "ddvc/nn.hpp"
#include "ddvc/rans.hpp"

namespace ddvc {

// Learned factorized prior over the hyper-latent z: per-channel flexible
// CDF built from a 3-layer monotone scalar net (softplus-positive weights,
// tanh-bounded gating). Bin probability of an integer symbol s is
// CDF(s + 0.5) - CDF(s - 0.5).
class FactorizedPrior {
  public:
    static constexpr int kDepth = 3;

    FactorizedPrior() = default;
    FactorizedPrior(nn::ParamStore& ps, const std::string& prefix, int channels);

    // sum over all elements of -log2 P(z_i); differentiable in z and params
    ag::Var bits(const ag::Var& z) const;

    double cdf(int channel, double x) const;
    rans::CdfTable coding_table(int channel) const;  // from current weights

    int channels() const { return channels_; }

  private:
    int channels_ = 0;
    ag::Var w1_, b1_, a1_, w2_, b2_, a2_, w3_, b3_;
};

struct SliceParams {
    ag::Var mu, sigma;  // sigma = 0.11 + softplus(raw), elementwise
};

// Channel-autoregressive conditional entropy model: a hyperprior pair plus
// per-slice parameter and latent-residual-prediction (LRP) nets. Slice j of
// the latent is modeled as N(mu_j, sigma_j^2) with (mu_j, sigma_j) predicted
// from the hyper features and the already-decoded slices y_hat_{<j}; after
// dequantization an LRP term r_j in (-0.5, 0.5) is added.
class EntropyModel {
  public:
    EntropyModel(nn::ParamStore& ps, const std::string& prefix, const CodecConfig& cfg);

    ag::Var hyper_encode(const ag::Var& y) const;       // y (m,H,W) -> z (n, H/4, W/4)
    ag::Var hyper_decode(const ag::Var& z_hat) const;   // -> features (2m, H, W)

    // decoded must hold exactly j earlier slices, each (m/S, H, W)
    SliceParams slice_params(const ag::Var& hyper_feat, const std::vector<ag::Var>& decoded,
                             int j) const;
    // q_j = Q(y_j); returns r_j with |r_j| < 0.5
    ag::Var lrp(const ag::Var& hyper_feat, const std::vector<ag::Var>& decoded,
                const ag::Var& mu_j, const ag::Var& q_j, int j) const;

    const FactorizedPrior& prior() const { return prior_; }
    const CodecConfig& config() const { return cfg_; }

  private:
    void check_slice(const std::vector<ag::Var>& decoded, int j) const;

    CodecConfig cfg_;
    FactorizedPrior prior_;
    nn::Conv he1_, he2_, he3_;
    nn::Deconv hd1_, hd2_;
    nn::Conv hd3_;
    std::vector<nn::Conv> mean1_, mean2_, scale1_, scale2_, lrp1_, lrp2_;
};

// rate of integer (or noisy) symbols t = y - mu under N(0, sigma^2), in bits
inline ag::Var gaussian_rate(const ag::Var& t, const ag::Var& sigma) {
    return ag::gauss_bits_sum(t, sigma);
}

}  // namespace ddvc
