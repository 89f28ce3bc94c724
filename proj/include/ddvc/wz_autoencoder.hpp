#pragma once

#include <string>

#include "ddvc/codec_config.hpp"
#include "ddvc/nn.hpp"

namespace ddvc {

// Four stride-2 conv stages with GDN between them: frame -> latent at 1/16
// spatial resolution with m_latent channels.
class AnalysisTransform {
  public:
    AnalysisTransform() = default;
    AnalysisTransform(nn::ParamStore& ps, const std::string& prefix, int in_channels,
                      const CodecConfig& cfg);
    ag::Var operator()(const ag::Var& x) const;

  private:
    nn::Conv c1_, c2_, c3_, c4_;
    nn::GDN g1_, g2_, g3_;
};

// Mirror of the analysis transform: four stride-2 deconv stages with inverse
// GDN between them; output is hard-clamped to [0,1] with a straight-through
// gradient. in_channels is m for intra frames and 2m for the conditional
// WZ decoder (latent concatenated with the side-information latent).
class SynthesisTransform {
  public:
    SynthesisTransform() = default;
    SynthesisTransform(nn::ParamStore& ps, const std::string& prefix, int in_channels,
                       const CodecConfig& cfg);
    ag::Var operator()(const ag::Var& y) const;

  private:
    nn::Deconv d1_, d2_, d3_, d4_;
    nn::GDN g1_, g2_, g3_;
};

// Conditional WZ autoencoder. The encoder side is enc() alone; si_enc and
// dec exist only on the decoder, which maps the interpolated side
// information into the latent domain and reconstructs from the pair.
struct WzAutoencoder {
    AnalysisTransform enc;
    AnalysisTransform si_enc;
    SynthesisTransform dec;

    WzAutoencoder() = default;
    WzAutoencoder(nn::ParamStore& ps, const std::string& prefix, const CodecConfig& cfg)
        : enc(ps, prefix + ".enc", 3, cfg),
          si_enc(ps, prefix + ".si_enc", 3, cfg),
          dec(ps, prefix + ".dec", 2 * cfg.m_latent, cfg) {}
};

// Plain autoencoder used for key frames.
struct IntraAutoencoder {
    AnalysisTransform enc;
    SynthesisTransform dec;

    IntraAutoencoder() = default;
    IntraAutoencoder(nn::ParamStore& ps, const std::string& prefix, const CodecConfig& cfg)
        : enc(ps, prefix + ".enc", 3, cfg), dec(ps, prefix + ".dec", cfg.m_latent, cfg) {}
};

}  // namespace ddvc
