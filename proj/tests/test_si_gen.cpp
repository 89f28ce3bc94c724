#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "ddvc/profile.hpp"
#include "ddvc/si_gen.hpp"

using namespace ddvc;
using ag::Var;

static Tensor blob_frame(int h, int w, float cx, float cy) {
    Tensor t(3, h, w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                t.at(c, y, x) = 0.2f + 0.7f * std::exp(-d2 / (20.f + 10.f * c));
            }
    return t;
}

TEST_CASE("dyadic schedule: documented order for keys 1 and 4") {
    auto s = si::gop_schedule(1, 4);
    REQUIRE(s.size() == 2);
    CHECK(s[0].target == 2);
    CHECK(s[0].ref0 == 1);
    CHECK(s[0].ref1 == 4);
    CHECK(s[0].t == doctest::Approx(1.f / 3.f));
    CHECK(s[1].target == 3);
    CHECK(s[1].ref0 == 2);
    CHECK(s[1].ref1 == 4);
    CHECK(s[1].t == doctest::Approx(0.5f));
}

TEST_CASE("dyadic schedule is a valid decode order for every GOP size 2..16") {
    for (int n = 2; n <= 16; ++n) {
        auto steps = si::gop_schedule(0, n);
        REQUIRE(int(steps.size()) == n - 1);
        std::set<int> available{0, n};
        for (auto& st : steps) {
            CHECK(available.count(st.ref0));
            CHECK(available.count(st.ref1));
            CHECK(!available.count(st.target));
            CHECK(st.ref0 < st.target);
            CHECK(st.target < st.ref1);
            CHECK(st.t == doctest::Approx(float(st.target - st.ref0) /
                                          float(st.ref1 - st.ref0)));
            available.insert(st.target);
        }
        CHECK(int(available.size()) == n + 1);
    }
    CHECK_THROWS_AS(si::gop_schedule(4, 4), std::invalid_argument);
}

TEST_CASE("mask fusion: saturated logits select one reference, zero averages") {
    Tensor a(3, 4, 4), b(3, 4, 4);
    a.fill(0.25f);
    b.fill(0.75f);
    auto w0 = ag::constant(a), w1 = ag::constant(b);
    Tensor logit(1, 4, 4);

    logit.fill(20.f);
    auto pure0 = si::Rife::fuse(w0, w1, ag::constant(logit));
    for (float v : pure0->val.v) CHECK(v == doctest::Approx(0.25f).epsilon(1e-5));

    logit.fill(-20.f);
    auto pure1 = si::Rife::fuse(w0, w1, ag::constant(logit));
    for (float v : pure1->val.v) CHECK(v == doctest::Approx(0.75f).epsilon(1e-5));

    logit.fill(0.f);
    auto mid = si::Rife::fuse(w0, w1, ag::constant(logit));
    for (float v : mid->val.v) CHECK(v == doctest::Approx(0.5f).epsilon(1e-5));
}

TEST_CASE("interpolation output: shape, range, determinism and profiling") {
    nn::ParamStore ps(31);
    si::Rife rife(ps, "rife", si::RifeConfig::toy());
    auto i0 = ag::constant(blob_frame(32, 32, 10.f, 12.f));
    auto i1 = ag::constant(blob_frame(32, 32, 14.f, 12.f));

    prof::enable(true);
    prof::reset();
    auto out = rife.interpolate(i0, i1, 0.5f);
    auto counters = prof::snapshot();
    prof::enable(false);

    CHECK(out->val.c == 3);
    CHECK(out->val.h == 32);
    CHECK(out->val.w == 32);
    for (float v : out->val.v) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
    CHECK(counters.si_gen_calls == 1);
    CHECK(counters.flops_by_stage.at(si::kStageMotionEst) > 0);
    CHECK(counters.flops_by_stage.at(si::kStageMotionComp) > 0);

    auto out2 = rife.interpolate(i0, i1, 0.5f);
    CHECK(out->val.v == out2->val.v);
    CHECK_THROWS_AS(rife.interpolate(i0, ag::constant(Tensor(3, 30, 32)), 0.5f),
                    std::invalid_argument);
}

TEST_CASE("a few training steps improve midpoint interpolation of a moving blob") {
    nn::ParamStore ps(32);
    si::Rife rife(ps, "rife", si::RifeConfig::toy());
    auto i0 = ag::constant(blob_frame(32, 32, 10.f, 16.f));
    auto i1 = ag::constant(blob_frame(32, 32, 18.f, 16.f));
    auto mid = ag::constant(blob_frame(32, 32, 14.f, 16.f));

    auto build = [&] { return ag::mse(rife.interpolate(i0, i1, 0.5f), mid); };
    float initial = build()->val.item();
    nn::Adam opt(ps.params("rife"), 1e-3f);
    for (int i = 0; i < 15; ++i) {
        auto loss = build();
        opt.zero_grad();
        ag::backward(loss);
        opt.step();
    }
    CHECK(build()->val.item() < initial);
}
