#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ddvc/entropy_model.hpp"

using namespace ddvc;
using ag::Var;

static Tensor random_tensor(int c, int h, int w, uint32_t seed, float lo = -1.f, float hi = 1.f) {
    Tensor t(c, h, w);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(lo, hi);
    for (auto& v : t.v) v = d(rng);
    return t;
}

template <typename F>
static void check_grads(F build, std::vector<Var> leaves, float eps = 1e-3f, float tol = 1e-2f) {
    Var loss = build();
    ag::backward(loss);
    for (auto& leaf : leaves) {
        REQUIRE(leaf->grad.size() == leaf->val.size());
        std::mt19937 pick(99);
        size_t n = leaf->val.size();
        size_t probes = std::min<size_t>(n, 12);
        for (size_t k = 0; k < probes; ++k) {
            size_t i = pick() % n;
            float orig = leaf->val.v[i];
            leaf->val.v[i] = orig + eps;
            float up = build()->val.item();
            leaf->val.v[i] = orig - eps;
            float dn = build()->val.item();
            leaf->val.v[i] = orig;
            float fd = (up - dn) / (2 * eps);
            float an = leaf->grad.v[i];
            float scale = std::max({std::fabs(fd), std::fabs(an), 1e-2f});
            CHECK(std::fabs(fd - an) / scale < tol);
        }
    }
}

TEST_CASE("factorized prior: bin probabilities sum to one, CDF stays monotone") {
    nn::ParamStore ps(7);
    FactorizedPrior prior(ps, "p", 4);

    // move every parameter off its init by fitting random data briefly
    std::mt19937 rng(11);
    nn::Adam opt(ps.params("p"), 0.02f);
    for (int step = 0; step < 30; ++step) {
        auto z = ag::constant(random_tensor(4, 3, 3, uint32_t(100 + step), -4.f, 4.f));
        auto loss = prior.bits(z);
        opt.zero_grad();
        ag::backward(loss);
        opt.step();
    }

    for (int ch = 0; ch < 4; ++ch) {
        double mass = 0, prev = prior.cdf(ch, -60.0);
        CHECK(prev < 1e-4);
        for (double x = -59.5; x <= 60.0; x += 0.5) {
            double c = prior.cdf(ch, x);
            CHECK(c >= prev);
            prev = c;
        }
        CHECK(prev > 1.0 - 1e-4);
        for (int s = -60; s <= 60; ++s)
            mass += prior.cdf(ch, s + 0.5) - prior.cdf(ch, s - 0.5);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("factorized prior: rate gradients match finite differences") {
    nn::ParamStore ps(8);
    FactorizedPrior prior(ps, "p", 2);
    auto z = ag::leaf(random_tensor(2, 2, 3, 21, -2.3f, 2.3f), true);
    auto build = [&] { return prior.bits(z); };
    std::vector<Var> leaves = ps.params("p");
    leaves.push_back(z);
    check_grads(build, leaves, 2e-3f, 2e-2f);
}

TEST_CASE("factorized prior: coding tables round trip through rANS") {
    nn::ParamStore ps(9);
    FactorizedPrior prior(ps, "p", 3);
    std::mt19937 rng(31);
    std::vector<rans::CdfTable> tables;
    for (int ch = 0; ch < 3; ++ch) tables.push_back(prior.coding_table(ch));
    std::vector<int32_t> vals;
    std::vector<const rans::CdfTable*> ctx;
    std::normal_distribution<double> gauss(0.0, 1.5);
    for (int i = 0; i < 600; ++i) {
        vals.push_back(int32_t(std::lround(gauss(rng))));
        ctx.push_back(&tables[size_t(i % 3)]);
    }
    vals[123] = 4000;  // escape path
    CHECK(rans::decode(rans::encode(vals, ctx), ctx) == vals);

    // quantized-table cost tracks the model's analytic rate
    auto zt = Tensor(3, 1, 1);
    double analytic = 0;
    for (size_t i = 0; i < 30; ++i) {
        int ch = int(i % 3);
        zt.v[size_t(ch)] = float(vals[i]);
        analytic -= std::log2(std::max(
            prior.cdf(ch, vals[i] + 0.5) - prior.cdf(ch, vals[i] - 0.5), 1e-9));
    }
    std::vector<int32_t> head(vals.begin(), vals.begin() + 30);
    std::vector<const rans::CdfTable*> hctx(ctx.begin(), ctx.begin() + 30);
    CHECK(rans::table_bits(head, hctx) == doctest::Approx(analytic).epsilon(0.05));
}

TEST_CASE("hyper transforms produce the documented shapes") {
    auto cfg = CodecConfig::toy();
    nn::ParamStore ps(10);
    EntropyModel em(ps, "em", cfg);
    auto y = ag::constant(random_tensor(cfg.m_latent, 16, 16, 41));
    auto z = em.hyper_encode(y);
    CHECK(z->val.c == cfg.n_filters);
    CHECK(z->val.h == 4);
    CHECK(z->val.w == 4);
    auto feat = em.hyper_decode(z);
    CHECK(feat->val.c == cfg.hyper_features());
    CHECK(feat->val.h == 16);
    CHECK(feat->val.w == 16);
}

TEST_CASE("slice params: shapes, sigma floor, and causality contract") {
    auto cfg = CodecConfig::toy();
    const int sc = cfg.slice_channels();
    nn::ParamStore ps(12);
    EntropyModel em(ps, "em", cfg);
    auto feat = ag::constant(random_tensor(cfg.hyper_features(), 8, 8, 51));

    std::vector<Var> decoded;
    for (int j = 0; j < cfg.s_slices; ++j) {
        auto p = em.slice_params(feat, decoded, j);
        CHECK(p.mu->val.c == sc);
        CHECK(p.sigma->val.c == sc);
        CHECK(p.mu->val.h == 8);
        for (float s : p.sigma->val.v) CHECK(s >= float(rans::kSigmaMin));
        decoded.push_back(ag::constant(random_tensor(sc, 8, 8, uint32_t(60 + j))));
    }

    // wrong history length is rejected
    CHECK_THROWS_AS(em.slice_params(feat, decoded, 1), std::invalid_argument);
    CHECK_THROWS_AS(em.slice_params(feat, {}, 1), std::invalid_argument);

    // perturbing slice 0's reconstruction changes slice 2's params but
    // cannot touch slice 1 computed from an untouched prefix
    std::vector<Var> prefix2{decoded[0], decoded[1]};
    auto before = em.slice_params(feat, prefix2, 2);
    auto p1 = em.slice_params(feat, {decoded[0]}, 1);
    auto bumped = ag::constant(decoded[0]->val);
    for (auto& v : bumped->val.v) v += 0.7f;
    auto after = em.slice_params(feat, {bumped, decoded[1]}, 2);
    double diff = 0;
    for (size_t i = 0; i < before.mu->val.size(); ++i)
        diff += std::fabs(double(before.mu->val.v[i]) - after.mu->val.v[i]);
    CHECK(diff > 1e-4);
    auto p1_again = em.slice_params(feat, {decoded[0]}, 1);
    CHECK(p1.mu->val.v == p1_again.mu->val.v);
}

TEST_CASE("LRP keeps reconstructions within half a step of the symbols") {
    auto cfg = CodecConfig::toy();
    const int sc = cfg.slice_channels();
    nn::ParamStore ps(13);
    EntropyModel em(ps, "em", cfg);
    auto feat = ag::constant(random_tensor(cfg.hyper_features(), 8, 8, 71, -2.f, 2.f));

    std::mt19937 rng(72);
    std::vector<Var> decoded;
    for (int j = 0; j < cfg.s_slices; ++j) {
        auto y_j = ag::constant(random_tensor(sc, 8, 8, uint32_t(80 + j), -6.f, 6.f));
        auto p = em.slice_params(feat, decoded, j);
        auto q_j = ag::round_ste(y_j, p.mu);
        auto r = em.lrp(feat, decoded, p.mu, q_j, j);
        auto y_hat = ag::add(q_j, r);
        for (size_t i = 0; i < y_hat->val.size(); ++i) {
            CHECK(std::fabs(r->val.v[i]) < 0.5f);
            CHECK(std::fabs(y_hat->val.v[i] - q_j->val.v[i]) < 0.5f);
            CHECK(std::fabs(y_hat->val.v[i] - y_j->val.v[i]) < 1.0f);
        }
        decoded.push_back(y_hat);
    }
}

TEST_CASE("gaussian rate matches the closed-form unit-variance bin") {
    auto t = ag::constant(Tensor::scalar(0.f));
    auto sigma = ag::constant(Tensor::scalar(1.f));
    double expect = -std::log2(std::erf(0.5 / std::sqrt(2.0)));
    CHECK(gaussian_rate(t, sigma)->val.item() == doctest::Approx(expect).epsilon(1e-4));
}
