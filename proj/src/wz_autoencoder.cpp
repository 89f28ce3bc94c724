#include "ddvc/wz_autoencoder.hpp"

namespace ddvc {

AnalysisTransform::AnalysisTransform(nn::ParamStore& ps, const std::string& prefix,
                                     int in_channels, const CodecConfig& cfg) {
    const int n = cfg.n_filters, m = cfg.m_latent;
    c1_ = nn::Conv(ps, prefix + ".c1", in_channels, n, 5, 2);
    c2_ = nn::Conv(ps, prefix + ".c2", n, n, 5, 2);
    c3_ = nn::Conv(ps, prefix + ".c3", n, n, 5, 2);
    c4_ = nn::Conv(ps, prefix + ".c4", n, m, 5, 2);
    g1_ = nn::GDN(ps, prefix + ".g1", n, false);
    g2_ = nn::GDN(ps, prefix + ".g2", n, false);
    g3_ = nn::GDN(ps, prefix + ".g3", n, false);
}

ag::Var AnalysisTransform::operator()(const ag::Var& x) const {
    auto y = g1_(c1_(x));
    y = g2_(c2_(y));
    y = g3_(c3_(y));
    return c4_(y);
}

SynthesisTransform::SynthesisTransform(nn::ParamStore& ps, const std::string& prefix,
                                       int in_channels, const CodecConfig& cfg) {
    const int n = cfg.n_filters;
    d1_ = nn::Deconv(ps, prefix + ".d1", in_channels, n, 5, 2);
    d2_ = nn::Deconv(ps, prefix + ".d2", n, n, 5, 2);
    d3_ = nn::Deconv(ps, prefix + ".d3", n, n, 5, 2);
    d4_ = nn::Deconv(ps, prefix + ".d4", n, 3, 5, 2);
    g1_ = nn::GDN(ps, prefix + ".g1", n, true);
    g2_ = nn::GDN(ps, prefix + ".g2", n, true);
    g3_ = nn::GDN(ps, prefix + ".g3", n, true);
}

ag::Var SynthesisTransform::operator()(const ag::Var& y) const {
    auto x = g1_(d1_(y));
    x = g2_(d2_(x));
    x = g3_(d3_(x));
    return ag::clamp01_ste(d4_(x));
}

}  // namespace ddvc
