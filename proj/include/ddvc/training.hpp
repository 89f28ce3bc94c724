#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "ddvc/codec.hpp"

namespace ddvc::train {

struct TrainConfig {
    double lambda = 0.0250;
    std::string metric = "mse";  // "mse" or "msssim"
    int stage = 1;
    bool custom_lambda = false;  // allow lambda off the published grid
    float lr = 0.001f;
    float plateau_factor = 2.f;
    int patience = 10;      // epochs without val improvement before lr drop
    int max_epochs = 100;
    int batch = 16;
    int crop = 256;
    bool zero_si = false;   // ablation: decoder sees a zeroed SI branch
    uint32_t seed = 7;
    std::string checkpoint_path;  // best-on-validation model, optional
    std::string loss_csv;         // per-epoch curve, optional

    // stage-dependent schedule defaults (patience 10/5, max epochs 100/50)
    static TrainConfig for_stage(int stage);
    void validate() const;
};

struct Triplet {
    Tensor ref0, target, ref1;
};
using Dataset = std::vector<Triplet>;

// Procedurally textured triplets with parameterized inter-frame motion.
// For "translate" the target is the exact (integer-pixel) motion midpoint.
// size must be divisible by 64; byte-identical for a fixed seed.
Dataset make_synthetic_dataset(int n, int size, const std::string& motion, uint32_t seed);

// Expected on-disk layout for real data: root/sequences/<a>/<b>/im{1,2,3}.png,
// one triplet per leaf directory. Not wired up at desk scale; throws.
Dataset load_vimeo_triplets(const std::string& root);

// Differentiable multi-scale SSIM (same window/weights as eval::ms_ssim).
ag::Var ms_ssim_var(const ag::Var& a, const ag::Var& b);

// L = lambda * d + bpp_y + bpp_z with d = MSE or 1 - MS-SSIM. Rates must be
// per-pixel-normalized and nonnegative.
ag::Var rd_loss(const ag::Var& x, const ag::Var& xhat, const ag::Var& bpp_y,
                const ag::Var& bpp_z, const TrainConfig& cfg);

// Full training-mode forward for one triplet: conditional WZ path on the
// middle frame (noise surrogate rates, STE quantization, LRP) plus the
// intra path on ref0. Stage 1 detaches the interpolator output.
ag::Var triplet_loss(const DeepModel& m, const Triplet& t, const TrainConfig& cfg,
                     std::mt19937& rng);

// L2 gradient norm per top-level parameter group ("wz", "intra", "wz_em",
// "intra_em", "rife"); call after backward().
std::map<std::string, double> group_grad_norms(const DeepModel& m);

struct TrainResult {
    std::vector<double> train_loss;  // per-epoch mean
    std::vector<double> val_loss;
    std::vector<float> lr;
    int best_epoch = -1;
    double best_val = 0;
};

// Plateau-scheduled Adam over the stage's parameter groups; keeps the
// best-on-validation weights in the model on return. Aborts on NaN loss.
TrainResult train_stage(DeepModel& m, const Dataset& data, const TrainConfig& cfg);

}  // namespace ddvc::train
