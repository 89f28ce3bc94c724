#include "ddvc/entropy_model.hpp"

#include <cmath>
#include <stdexcept>

namespace ddvc {

namespace {

constexpr int kD = FactorizedPrior::kDepth;
const double kLn2 = std::log(2.0);

double sp(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }
double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One scalar pass through the 3-layer monotone net of a single channel,
// with stored intermediates so bwd() can run on the same input.
struct Chain {
    const float *w1, *b1, *a1, *w2, *b2, *a2, *w3;
    double b3;
    double u1[kD], u2[kD], t1[kD], t2[kD];

    Chain(const Tensor& w1t, const Tensor& b1t, const Tensor& a1t, const Tensor& w2t,
          const Tensor& b2t, const Tensor& a2t, const Tensor& w3t, const Tensor& b3t, int ch)
        : w1(w1t.plane(ch)),
          b1(b1t.plane(ch)),
          a1(a1t.plane(ch)),
          w2(w2t.plane(ch)),
          b2(b2t.plane(ch)),
          a2(a2t.plane(ch)),
          w3(w3t.plane(ch)),
          b3(b3t.v[size_t(ch)]) {}

    double fwd(double x) {
        for (int k = 0; k < kD; ++k) {
            u1[k] = sp(w1[k]) * x + b1[k];
            t1[k] = u1[k] + std::tanh(double(a1[k])) * std::tanh(u1[k]);
        }
        for (int i = 0; i < kD; ++i) {
            double u = b2[i];
            for (int k = 0; k < kD; ++k) u += sp(w2[i * kD + k]) * t1[k];
            u2[i] = u;
            t2[i] = u + std::tanh(double(a2[i])) * std::tanh(u);
        }
        double u3 = b3;
        for (int i = 0; i < kD; ++i) u3 += sp(w3[i]) * t2[i];
        return u3;
    }

    // g = dL/d(logit); accumulates parameter grads when pointers are set
    // and returns dL/dx. Must follow fwd() with the same x.
    double bwd(double g, double x, float* gw1, float* gb1, float* ga1, float* gw2, float* gb2,
               float* ga2, float* gw3, float* gb3) {
        double gt1[kD] = {0, 0, 0};
        for (int i = 0; i < kD; ++i) {
            if (gw3) gw3[i] += float(g * sigm(w3[i]) * t2[i]);
            double gt2 = g * sp(w3[i]);
            double th = std::tanh(u2[i]), ta = std::tanh(double(a2[i]));
            double gu2 = gt2 * (1.0 + ta * (1.0 - th * th));
            if (ga2) ga2[i] += float(gt2 * (1.0 - ta * ta) * th);
            if (gb2) gb2[i] += float(gu2);
            for (int k = 0; k < kD; ++k) {
                gt1[k] += gu2 * sp(w2[i * kD + k]);
                if (gw2) gw2[i * kD + k] += float(gu2 * sigm(w2[i * kD + k]) * t1[k]);
            }
        }
        if (gb3) *gb3 += float(g);
        double gx = 0;
        for (int k = 0; k < kD; ++k) {
            double th = std::tanh(u1[k]), ta = std::tanh(double(a1[k]));
            double gu1 = gt1[k] * (1.0 + ta * (1.0 - th * th));
            if (ga1) ga1[k] += float(gt1[k] * (1.0 - ta * ta) * th);
            if (gb1) gb1[k] += float(gu1);
            if (gw1) gw1[k] += float(gu1 * sigm(w1[k]) * x);
            gx += gu1 * sp(w1[k]);
        }
        return gx;
    }
};

}  // namespace

FactorizedPrior::FactorizedPrior(nn::ParamStore& ps, const std::string& prefix, int channels)
    : channels_(channels) {
    // softplus^-1(1) for the input layer, softplus^-1(1/3) inside, so the
    // initial logit has roughly unit slope; a=0 makes it exactly logistic.
    const float wi = 0.5413f, wm = -0.9275f;
    w1_ = ps.get_const_init(prefix + ".w1", channels, kD, 1, wi);
    b1_ = ps.get(prefix + ".b1", channels, kD, 1, -0.5f, 0.5f);
    a1_ = ps.get_const_init(prefix + ".a1", channels, kD, 1, 0.f);
    w2_ = ps.get_const_init(prefix + ".w2", channels, kD, kD, wm);
    b2_ = ps.get(prefix + ".b2", channels, kD, 1, -0.5f, 0.5f);
    a2_ = ps.get_const_init(prefix + ".a2", channels, kD, 1, 0.f);
    w3_ = ps.get_const_init(prefix + ".w3", channels, kD, 1, wm);
    b3_ = ps.get_const_init(prefix + ".b3", channels, 1, 1, 0.f);
}

ag::Var FactorizedPrior::bits(const ag::Var& z) const {
    if (z->val.c != channels_) throw std::invalid_argument("factorized prior: channel mismatch");
    double total = 0;
    for (int ch = 0; ch < channels_; ++ch) {
        Chain c(w1_->val, b1_->val, a1_->val, w2_->val, b2_->val, a2_->val, w3_->val, b3_->val,
                ch);
        const float* p = z->val.plane(ch);
        for (int i = 0; i < z->val.h * z->val.w; ++i) {
            double x = p[i];
            double pr = sigm(c.fwd(x + 0.5)) - sigm(c.fwd(x - 0.5));
            total -= std::log2(std::max(pr, 1e-9));
        }
    }
    std::vector<ag::Var> parents{z, w1_, b1_, a1_, w2_, b2_, a2_, w3_, b3_};
    return ag::make_node(Tensor::scalar(float(total)), std::move(parents), [](ag::Node& n) {
        auto& z = n.parents[0];
        float* gp[9] = {nullptr};
        for (int k = 0; k < 9; ++k) {
            if (!n.parents[size_t(k)]->req) continue;
            n.parents[size_t(k)]->ensure_grad();
            gp[k] = n.parents[size_t(k)]->grad.v.data();
        }
        const double g0 = n.grad.v[0];
        const Tensor &w1 = n.parents[1]->val, &b1 = n.parents[2]->val, &a1 = n.parents[3]->val,
                     &w2 = n.parents[4]->val, &b2 = n.parents[5]->val, &a2 = n.parents[6]->val,
                     &w3 = n.parents[7]->val, &b3 = n.parents[8]->val;
        auto off = [](float* base, int ch, int n_per_ch) {
            return base ? base + size_t(ch) * n_per_ch : nullptr;
        };
        for (int ch = 0; ch < z->val.c; ++ch) {
            Chain c(w1, b1, a1, w2, b2, a2, w3, b3, ch);
            const float* zp = z->val.plane(ch);
            float* gz = gp[0] ? n.parents[0]->grad.plane(ch) : nullptr;
            for (int i = 0; i < z->val.h * z->val.w; ++i) {
                double x = zp[i];
                double cp = sigm(c.fwd(x + 0.5));
                double dpdx = 0;
                {
                    Chain cplus = c;  // keeps the plus-side intermediates
                    double cm = sigm(c.fwd(x - 0.5));
                    double pr = cp - cm;
                    if (pr <= 1e-9) continue;  // floored: no gradient
                    double dldp = -g0 / (pr * kLn2);
                    dpdx += cplus.bwd(dldp * cp * (1.0 - cp), x + 0.5, off(gp[1], ch, kD),
                                      off(gp[2], ch, kD), off(gp[3], ch, kD),
                                      off(gp[4], ch, kD * kD), off(gp[5], ch, kD),
                                      off(gp[6], ch, kD), off(gp[7], ch, kD), off(gp[8], ch, 1));
                    dpdx += c.bwd(-dldp * cm * (1.0 - cm), x - 0.5, off(gp[1], ch, kD),
                                  off(gp[2], ch, kD), off(gp[3], ch, kD), off(gp[4], ch, kD * kD),
                                  off(gp[5], ch, kD), off(gp[6], ch, kD), off(gp[7], ch, kD),
                                  off(gp[8], ch, 1));
                }
                if (gz) gz[i] += float(dpdx);
            }
        }
    });
}

double FactorizedPrior::cdf(int channel, double x) const {
    Chain c(w1_->val, b1_->val, a1_->val, w2_->val, b2_->val, a2_->val, w3_->val, b3_->val,
            channel);
    return sigm(c.fwd(x));
}

rans::CdfTable FactorizedPrior::coding_table(int channel) const {
    int qmax = 1;
    while (qmax < 255 && cdf(channel, -qmax - 0.5) + 1.0 - cdf(channel, qmax + 0.5) >= 1e-6)
        ++qmax;
    std::vector<double> pmf(size_t(2 * qmax + 1));
    for (int s = -qmax; s <= qmax; ++s)
        pmf[size_t(s + qmax)] = cdf(channel, s + 0.5) - cdf(channel, s - 0.5);
    return rans::quantize_pmf(pmf, qmax, /*has_escape=*/true);
}

EntropyModel::EntropyModel(nn::ParamStore& ps, const std::string& prefix, const CodecConfig& cfg)
    : cfg_(cfg), prior_(ps, prefix + ".prior", cfg.n_filters) {
    cfg.validate();
    const int m = cfg.m_latent, n = cfg.n_filters, f = cfg.hyper_features();
    const int sc = cfg.slice_channels();
    he1_ = nn::Conv(ps, prefix + ".he1", m, n, 3, 1);
    he2_ = nn::Conv(ps, prefix + ".he2", n, n, 5, 2);
    he3_ = nn::Conv(ps, prefix + ".he3", n, n, 5, 2);
    hd1_ = nn::Deconv(ps, prefix + ".hd1", n, n, 5, 2);
    hd2_ = nn::Deconv(ps, prefix + ".hd2", n, f, 5, 2);
    hd3_ = nn::Conv(ps, prefix + ".hd3", f, f, 3, 1);
    const int mid = std::max(16, 2 * sc);
    for (int j = 0; j < cfg.s_slices; ++j) {
        std::string sj = prefix + ".s" + std::to_string(j);
        mean1_.emplace_back(ps, sj + ".mean1", f + j * sc, mid, 3, 1);
        mean2_.emplace_back(ps, sj + ".mean2", mid, sc, 3, 1);
        scale1_.emplace_back(ps, sj + ".scale1", f + j * sc, mid, 3, 1);
        scale2_.emplace_back(ps, sj + ".scale2", mid, sc, 3, 1);
        lrp1_.emplace_back(ps, sj + ".lrp1", f + (j + 2) * sc, mid, 3, 1);
        lrp2_.emplace_back(ps, sj + ".lrp2", mid, sc, 3, 1);
    }
}

ag::Var EntropyModel::hyper_encode(const ag::Var& y) const {
    auto x = ag::lrelu(he1_(y));
    x = ag::lrelu(he2_(x));
    return he3_(x);
}

ag::Var EntropyModel::hyper_decode(const ag::Var& z_hat) const {
    auto x = ag::lrelu(hd1_(z_hat));
    x = ag::lrelu(hd2_(x));
    return hd3_(x);
}

void EntropyModel::check_slice(const std::vector<ag::Var>& decoded, int j) const {
    if (j < 0 || j >= cfg_.s_slices) throw std::invalid_argument("slice index out of range");
    if (int(decoded.size()) != j)
        throw std::invalid_argument("slice " + std::to_string(j) + " needs exactly " +
                                    std::to_string(j) + " decoded slices");
    for (auto& d : decoded)
        if (d->val.c != cfg_.slice_channels())
            throw std::invalid_argument("decoded slice has wrong channel count");
}

SliceParams EntropyModel::slice_params(const ag::Var& hyper_feat,
                                       const std::vector<ag::Var>& decoded, int j) const {
    check_slice(decoded, j);
    std::vector<ag::Var> in{hyper_feat};
    in.insert(in.end(), decoded.begin(), decoded.end());
    auto ctx = in.size() == 1 ? in[0] : ag::concat(in);
    auto mu = mean2_[size_t(j)](ag::lrelu(mean1_[size_t(j)](ctx)));
    auto sraw = scale2_[size_t(j)](ag::lrelu(scale1_[size_t(j)](ctx)));
    auto sigma = ag::add_scalar(ag::softplus(sraw), float(rans::kSigmaMin));
    return {mu, sigma};
}

ag::Var EntropyModel::lrp(const ag::Var& hyper_feat, const std::vector<ag::Var>& decoded,
                          const ag::Var& mu_j, const ag::Var& q_j, int j) const {
    check_slice(decoded, j);
    std::vector<ag::Var> in{hyper_feat};
    in.insert(in.end(), decoded.begin(), decoded.end());
    in.push_back(mu_j);
    in.push_back(q_j);
    auto x = ag::concat(in);
    return ag::mul_scalar(ag::tanh_(lrp2_[size_t(j)](ag::lrelu(lrp1_[size_t(j)](x)))), 0.5f);
}

}  // namespace ddvc
