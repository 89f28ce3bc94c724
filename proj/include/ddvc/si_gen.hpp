#pragma once

#include <string>
#include <vector>

#include "ddvc/nn.hpp"

namespace ddvc::si {

// Stage names used by the FLOPs profiler for motion work.
inline constexpr const char* kStageMotionEst = "motion-estimation";
inline constexpr const char* kStageMotionComp = "motion-compensation";

struct SiStep {
    int target, ref0, ref1;  // frame indices; refs are decoded before target
    float t;                 // relative position of target between the refs
};

// Hierarchical (dyadic) interpolation order for the frames strictly between
// two decoded key frames: each level halves the reference span, and every
// step's references are either keys or earlier targets of the schedule.
std::vector<SiStep> gop_schedule(int key0, int key1);

struct RifeConfig {
    int block_convs = 6;  // conv layers per flow block
    int block_ch = 64;
    int refine_ch = 64;

    static RifeConfig full() { return RifeConfig{}; }
    static RifeConfig toy() { return RifeConfig{3, 16, 16}; }
};

// Coarse-to-fine frame interpolator: three flow blocks at 1/4, 1/2 and full
// resolution jointly refine a bidirectional flow field and a fusion mask;
// warped references are blended by the mask and a residual refinement net
// adds a bounded correction.
class Rife {
  public:
    Rife() = default;
    Rife(nn::ParamStore& ps, const std::string& prefix, const RifeConfig& cfg);

    // i0, i1: (3,H,W) frames in [0,1], H and W divisible by 4; t in (0,1)
    ag::Var interpolate(const ag::Var& i0, const ag::Var& i1, float t) const;

    // sigmoid(mask_logit) blends the warped references channelwise:
    // M*w0 + (1-M)*w1
    static ag::Var fuse(const ag::Var& w0, const ag::Var& w1, const ag::Var& mask_logit);

  private:
    struct Block {
        std::vector<nn::Conv> convs;
    };
    ag::Var run_block(const Block& b, const ag::Var& x) const;

    RifeConfig cfg_;
    std::vector<Block> blocks_;  // scales 4, 2, 1
    std::vector<nn::Conv> refine_;
};

}  // namespace ddvc::si
