#pragma once

#include <stdexcept>

namespace ddvc {

// Lambda grids (index -> value), MSE and MS-SSIM flavors.
constexpr double kLambdaGridMse[5] = {0.0018, 0.0035, 0.0067, 0.0130, 0.0250};
constexpr double kLambdaGridMsssim[5] = {2.40, 4.58, 8.73, 16.64, 31.73};

struct CodecConfig {
    int n_filters = 128;   // hidden conv channels
    int m_latent = 192;    // latent channels of y
    int s_slices = 8;      // ChAR slice count
    int lambda_id = 4;     // index into the lambda grid

    int slice_channels() const { return m_latent / s_slices; }
    int hyper_features() const { return 2 * m_latent; }

    void validate() const {
        if (n_filters <= 0 || m_latent <= 0) throw std::invalid_argument("channels must be > 0");
        if (s_slices <= 0 || m_latent % s_slices)
            throw std::invalid_argument("m_latent must be divisible by s_slices");
        if (lambda_id < 0 || lambda_id > 4) throw std::invalid_argument("lambda_id out of range");
    }

    static CodecConfig full() { return CodecConfig{}; }
    // small enough to train on a single CPU core in minutes
    static CodecConfig toy() { return CodecConfig{16, 16, 4, 4}; }
};

}  // namespace ddvc
