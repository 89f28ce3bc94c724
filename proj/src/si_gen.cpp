#include "ddvc/si_gen.hpp"

#include <deque>
#include <stdexcept>

#include "ddvc/profile.hpp"

namespace ddvc::si {

std::vector<SiStep> gop_schedule(int key0, int key1) {
    if (key1 <= key0) throw std::invalid_argument("gop_schedule: keys out of order");
    std::vector<SiStep> steps;
    std::deque<std::pair<int, int>> spans{{key0, key1}};
    while (!spans.empty()) {
        auto [lo, hi] = spans.front();
        spans.pop_front();
        if (hi - lo <= 1) continue;
        int mid = (lo + hi) / 2;
        steps.push_back({mid, lo, hi, float(mid - lo) / float(hi - lo)});
        spans.emplace_back(lo, mid);
        spans.emplace_back(mid, hi);
    }
    return steps;
}

namespace {
constexpr int kScales[3] = {4, 2, 1};
// warped refs (3+3) + bidirectional flow (4) + mask logit (1) + t map (1)
constexpr int kBlockIn = 12;
// fused (3) + warped refs (3+3) + flow (4) + mask logit (1)
constexpr int kRefineIn = 14;
}  // namespace

Rife::Rife(nn::ParamStore& ps, const std::string& prefix, const RifeConfig& cfg) : cfg_(cfg) {
    if (cfg.block_convs < 2 || cfg.block_ch < 1) throw std::invalid_argument("rife config");
    for (int s = 0; s < 3; ++s) {
        Block b;
        std::string bp = prefix + ".b" + std::to_string(s);
        for (int l = 0; l < cfg.block_convs; ++l) {
            int ci = l == 0 ? kBlockIn : cfg.block_ch;
            int co = l == cfg.block_convs - 1 ? 5 : cfg.block_ch;
            b.convs.emplace_back(ps, bp + ".c" + std::to_string(l), ci, co, 3, 1);
        }
        blocks_.push_back(std::move(b));
    }
    refine_.emplace_back(ps, prefix + ".r0", kRefineIn, cfg.refine_ch, 3, 1);
    refine_.emplace_back(ps, prefix + ".r1", cfg.refine_ch, cfg.refine_ch, 3, 1);
    refine_.emplace_back(ps, prefix + ".r2", cfg.refine_ch, 3, 3, 1);
}

ag::Var Rife::fuse(const ag::Var& w0, const ag::Var& w1, const ag::Var& mask_logit) {
    auto m = ag::sigmoid(mask_logit);
    auto m3 = ag::concat({m, m, m});
    auto one_minus = ag::add_scalar(ag::mul_scalar(m3, -1.f), 1.f);
    return ag::add(ag::mul(m3, w0), ag::mul(one_minus, w1));
}

ag::Var Rife::run_block(const Block& b, const ag::Var& x) const {
    auto h = x;
    for (size_t l = 0; l + 1 < b.convs.size(); ++l) h = ag::lrelu(b.convs[l](h));
    return b.convs.back()(h);
}

ag::Var Rife::interpolate(const ag::Var& i0, const ag::Var& i1, float t) const {
    if (!i0->val.same_shape(i1->val) || i0->val.c != 3)
        throw std::invalid_argument("rife: inputs must be matching (3,H,W) frames");
    const int h = i0->val.h, w = i0->val.w;
    if (h % 4 || w % 4) throw std::invalid_argument("rife: H and W must be divisible by 4");
    prof::mark_si_gen();

    auto flow = ag::constant(Tensor(4, h, w));
    auto mask_logit = ag::constant(Tensor(1, h, w));
    Tensor tm(1, h, w);
    tm.fill(t);
    auto tmap = ag::constant(std::move(tm));

    {
        prof::StageScope stage(kStageMotionEst);
        for (int s = 0; s < 3; ++s) {
            auto w0 = ag::warp(i0, ag::slice_c(flow, 0, 2));
            auto w1 = ag::warp(i1, ag::slice_c(flow, 2, 4));
            auto in = ag::concat({w0, w1, flow, mask_logit, tmap});
            int k = kScales[s];
            if (k > 1) in = ag::resize(in, h / k, w / k);
            auto out = run_block(blocks_[size_t(s)], in);
            if (k > 1) out = ag::resize(out, h, w);
            flow = ag::add(flow, ag::slice_c(out, 0, 4));
            mask_logit = ag::add(mask_logit, ag::slice_c(out, 4, 5));
        }
    }

    prof::StageScope stage(kStageMotionComp);
    auto w0 = ag::warp(i0, ag::slice_c(flow, 0, 2));
    auto w1 = ag::warp(i1, ag::slice_c(flow, 2, 4));
    auto fused = fuse(w0, w1, mask_logit);

    auto r = ag::lrelu(refine_[0](ag::concat({fused, w0, w1, flow, mask_logit})));
    r = ag::lrelu(refine_[1](r));
    auto delta = ag::tanh_(refine_[2](r));
    return ag::clamp01_ste(ag::add(fused, delta));
}

}  // namespace ddvc::si
