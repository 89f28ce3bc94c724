#pragma once

#include <map>
#include <string>
#include <vector>

#include "ddvc/codec.hpp"
#include "ddvc/video_io.hpp"

namespace ddvc::eval {

// Peak signal-to-noise ratio over all channels, capped at 100 dB.
double psnr(const Tensor& a, const Tensor& b);

// Multi-scale SSIM with the standard 11x11 sigma=1.5 window and 5-scale
// weights (0.0448, 0.2856, 0.3001, 0.2363, 0.1333). Images whose smaller
// dimension is under 160 use fewer scales with renormalized weights.
double ms_ssim(const Tensor& a, const Tensor& b);

// 10*log10(1/(1-v)): 0.9 maps to exactly 10 dB.
double msssim_db(double v);

double psnr_sequence(const VideoSequence& a, const VideoSequence& b);
double ms_ssim_sequence(const VideoSequence& a, const VideoSequence& b);

// ------------------------------------------------- Bjontegaard deltas

struct RdPoint {
    double rate;     // > 0, e.g. bpp
    double quality;  // e.g. PSNR in dB
};

// Average rate difference of `test` against `ref` in percent (negative
// means test needs fewer bits at equal quality). Cubic fit of log10(rate)
// over quality, integrated in closed form over the overlapping quality
// range. Needs >= 4 points per curve.
double bd_rate(const std::vector<RdPoint>& ref, const std::vector<RdPoint>& test);

// Average quality difference at equal rate (positive: test is better).
double bd_quality(const std::vector<RdPoint>& ref, const std::vector<RdPoint>& test);

// ----------------------------------------------------- reports and plots

struct FrameMetrics {
    int index = 0;
    std::string role;  // "key" or "wz"
    double bits = 0;
    double psnr = 0;
    double msssim = 0;
};

struct EvalReport {
    int width = 0, height = 0;
    double bpp = 0;
    double avg_psnr = 0, avg_msssim = 0, avg_msssim_db = 0;
    std::vector<FrameMetrics> frames;
};

EvalReport evaluate(const VideoSequence& ref, const VideoSequence& dec,
                    const container::Container& c);

void write_json(const EvalReport& r, const std::string& path);
void write_csv(const EvalReport& r, const std::string& path);

// Simple SVG rate-distortion chart; one polyline per named curve.
void write_svg(const std::map<std::string, std::vector<RdPoint>>& curves,
               const std::string& path);

// ------------------------------------------------------------ complexity

struct ComplexityReport {
    std::map<std::string, uint64_t> encoder_flops, decoder_flops;
    uint64_t encoder_total = 0, decoder_total = 0;
    uint64_t encoder_si_gen_calls = 0, decoder_si_gen_calls = 0;
    double encoder_ms = 0, decoder_ms = 0;  // wall-clock medians over `runs`
};

// Encode/decode with FLOPs accounting enabled; latency is the median over
// `runs` repetitions of each direction.
ComplexityReport profile(const DeepModel& m, const VideoSequence& seq, int gop_size,
                         int runs = 1);

// One grayscale PNG per latent channel (min-max normalized; constant
// channels come out mid-gray). Returns the written paths.
std::vector<std::string> visualize_latents(const Tensor& latent, const std::string& dir);

}  // namespace ddvc::eval
