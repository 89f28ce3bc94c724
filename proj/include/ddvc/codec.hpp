#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ddvc/checkpoint.hpp"
#include "ddvc/container.hpp"
#include "ddvc/entropy_model.hpp"
#include "ddvc/si_gen.hpp"
#include "ddvc/video_io.hpp"
#include "ddvc/wz_autoencoder.hpp"

namespace ddvc {

// Profiler stage for transform + entropy coding work (the deep codec codes
// no motion, so "motion-compression" stays at zero FLOPs).
inline constexpr const char* kStageResidual = "residual/wz-compression";
inline constexpr const char* kStageMotionCompression = "motion-compression";

// A full deep-codec model: conditional WZ autoencoder, intra autoencoder,
// their entropy models and the frame interpolator, all in one parameter
// store so a checkpoint captures everything.
struct DeepModel {
    CodecConfig cfg;
    si::RifeConfig rife_cfg;
    std::string metric;  // "mse" or "msssim"
    nn::ParamStore ps;
    WzAutoencoder wz;
    IntraAutoencoder intra;
    EntropyModel wz_em;
    EntropyModel intra_em;
    si::Rife rife;

    DeepModel(const CodecConfig& cfg, const si::RifeConfig& rcfg, uint32_t seed, bool trainable,
              std::string metric = "mse");
    DeepModel(const DeepModel&) = delete;

    double lambda() const;
    std::string config_json() const;
    void save_checkpoint(const std::string& path) const;
    static std::unique_ptr<DeepModel> from_checkpoint(const std::string& path,
                                                      bool trainable = false);
};

// Entropy-coded latent: substream 0 is the hyper-latent under the factorized
// prior, substreams 1..S are the latent slices under their conditional
// Gaussians. est_bits is the model's rate estimate (table cross-entropy,
// no coder flush overhead).
struct LatentCode {
    std::vector<std::vector<uint8_t>> substreams;
    double est_bits = 0;
};

LatentCode encode_latents(const EntropyModel& em, const ag::Var& y);
// latent_h/latent_w: spatial dims of y (padded frame dims / 16)
ag::Var decode_latents(const EntropyModel& em,
                       const std::vector<std::vector<uint8_t>>& substreams, int latent_h,
                       int latent_w);

struct EncodeStats {
    double est_bits = 0;
    double actual_bits = 0;  // payload bytes * 8
    std::vector<double> frame_est_bits;
    std::vector<double> frame_actual_bits;
};

container::Container deep_encode(const DeepModel& m, const VideoSequence& seq, int gop_size,
                                 EncodeStats* stats = nullptr);
VideoSequence deep_decode(const DeepModel& m, const container::Container& c);

}  // namespace ddvc
