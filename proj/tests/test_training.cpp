#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

#include "ddvc/eval.hpp"
#include "ddvc/training.hpp"

using namespace ddvc;
using train::Dataset;
using train::TrainConfig;
using train::Triplet;

static TrainConfig toy_cfg(int stage) {
    auto c = TrainConfig::for_stage(stage);
    c.crop = 64;
    c.batch = 2;
    return c;
}

TEST_CASE("rd_loss: boundary values and the published grid") {
    Tensor z(1, 4, 4);
    z.fill(0.f);
    Tensor p(1, 4, 4);
    p.fill(0.1f);  // mse vs zeros = 0.01
    Tensor zero1(1, 1, 1);
    zero1.fill(0.f);
    Tensor half(1, 1, 1);
    half.fill(0.5f);

    TrainConfig cfg = toy_cfg(1);
    cfg.lambda = 0.0250;
    auto zv = ag::constant(z), pv = ag::constant(p);
    auto rz = ag::constant(zero1), rh = ag::constant(half);

    CHECK(train::rd_loss(zv, zv, rz, rz, cfg)->val.v[0] == doctest::Approx(0.0));
    CHECK(train::rd_loss(zv, pv, rh, rz, cfg)->val.v[0] == doctest::Approx(0.50025).epsilon(1e-6));

    cfg.lambda = 0.0;
    cfg.custom_lambda = true;
    CHECK(train::rd_loss(zv, pv, rh, rz, cfg)->val.v[0] == doctest::Approx(0.5));

    Tensor neg(1, 1, 1);
    neg.fill(-0.1f);
    CHECK_THROWS_AS(train::rd_loss(zv, pv, ag::constant(neg), rz, cfg), std::invalid_argument);

    TrainConfig bad = toy_cfg(1);
    bad.lambda = 0.01;  // off-grid
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.custom_lambda = true;
    CHECK_NOTHROW(bad.validate());
    bad.stage = 3;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    TrainConfig msgrid = toy_cfg(1);
    msgrid.metric = "msssim";
    msgrid.lambda = 8.73;
    CHECK_NOTHROW(msgrid.validate());
}

TEST_CASE("synthetic dataset: exact translation midpoint and determinism") {
    auto d = train::make_synthetic_dataset(3, 64, "translate", 42);
    REQUIRE(d.size() == 3);
    for (auto& t : d) {
        CHECK(t.target.c == 3);
        CHECK(t.target.h == 64);
        CHECK(t.target.w == 64);
        for (float v : t.target.v) {
            CHECK(v >= 0.f);
            CHECK(v <= 1.f);
        }
        // recover the per-frame shift by matching target against ref0,
        // then verify it exactly and check ref1 continues the motion
        int bdx = 0, bdy = 0;
        double berr = 1e30;
        for (int dy = -3; dy <= 3; ++dy)
            for (int dx = -3; dx <= 3; ++dx) {
                double err = 0;
                for (int y = 8; y < 56; ++y)
                    for (int x = 8; x < 56; ++x) {
                        double e = t.target.at(0, y, x) - t.ref0.at(0, y + dy, x + dx);
                        err += e * e;
                    }
                if (err < berr) berr = err, bdx = dx, bdy = dy;
            }
        CHECK((bdx != 0 || bdy != 0));
        for (int y = 8; y < 56; ++y)
            for (int x = 8; x < 56; ++x)
                for (int ch = 0; ch < 3; ++ch)
                    REQUIRE(t.target.at(ch, y, x) == t.ref0.at(ch, y + bdy, x + bdx));
        double cont = 0;
        for (int y = 8; y < 56; ++y)
            for (int x = 8; x < 56; ++x) {
                double e = t.ref1.at(0, y, x) - t.target.at(0, y + bdy, x + bdx);
                cont += e * e;
            }
        CHECK(cont == doctest::Approx(0.0));
    }

    auto d2 = train::make_synthetic_dataset(3, 64, "translate", 42);
    for (size_t i = 0; i < d.size(); ++i)
        CHECK(std::memcmp(d[i].target.v.data(), d2[i].target.v.data(),
                          d[i].target.size() * sizeof(float)) == 0);
    auto d3 = train::make_synthetic_dataset(3, 64, "translate", 43);
    CHECK(std::memcmp(d[0].target.v.data(), d3[0].target.v.data(),
                      d[0].target.size() * sizeof(float)) != 0);

    CHECK_THROWS_AS(train::make_synthetic_dataset(1, 65, "translate", 1), std::invalid_argument);
    CHECK_THROWS_AS(train::make_synthetic_dataset(1, 64, "swirl", 1), std::invalid_argument);
    for (const char* mode : {"rotate", "zoom"}) {
        auto dm = train::make_synthetic_dataset(1, 64, mode, 5);
        double diff = 0;
        for (size_t i = 0; i < dm[0].target.size(); ++i)
            diff += std::fabs(dm[0].target.v[i] - dm[0].ref0.v[i]);
        CHECK(diff > 1.0);  // real motion happened
    }
}

TEST_CASE("differentiable ms-ssim: forward matches eval, gradient is numeric") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<float> u(0.1f, 0.9f);
    Tensor a(3, 16, 16), b(3, 16, 16);
    for (auto& v : a.v) v = u(rng);
    for (size_t i = 0; i < b.size(); ++i) b.v[i] = std::clamp(a.v[i] + 0.1f * (u(rng) - 0.5f), 0.f, 1.f);

    auto av = ag::leaf(a, true);
    auto bv = ag::constant(b);
    auto ms = train::ms_ssim_var(av, bv);
    CHECK(double(ms->val.v[0]) == doctest::Approx(eval::ms_ssim(a, b)).epsilon(1e-4));

    ag::backward(ms);
    for (size_t idx : {size_t(100), size_t(300), size_t(600)}) {
        float eps = 2e-3f;
        Tensor ap = a, am = a;
        ap.v[idx] += eps;
        am.v[idx] -= eps;
        double num = (train::ms_ssim_var(ag::constant(ap), bv)->val.v[0] -
                      train::ms_ssim_var(ag::constant(am), bv)->val.v[0]) /
                     (2 * eps);
        CHECK(double(av->grad.v[idx]) == doctest::Approx(num).epsilon(0.05).scale(0.01));
    }
}

TEST_CASE("triplet_loss: gradients reach every group in stage 2, rife stays cold in stage 1") {
    DeepModel m(CodecConfig::toy(), si::RifeConfig::toy(), 11, true);
    auto data = train::make_synthetic_dataset(1, 64, "translate", 3);
    std::mt19937 rng(1);

    TrainConfig cfg = toy_cfg(2);
    auto loss = train::triplet_loss(m, data[0], cfg, rng);
    CHECK(std::isfinite(loss->val.v[0]));
    ag::backward(loss);
    auto norms = train::group_grad_norms(m);
    for (const char* g : {"wz", "intra", "wz_em", "intra_em", "rife"}) {
        INFO(g);
        CHECK(norms[g] > 0.0);
    }

    ag::zero_grad(m.ps.params());
    TrainConfig s1 = toy_cfg(1);
    ag::backward(train::triplet_loss(m, data[0], s1, rng));
    auto n1 = train::group_grad_norms(m);
    CHECK(n1["rife"] == 0.0);
    CHECK(n1["wz"] > 0.0);
    CHECK(n1["wz_em"] > 0.0);

    // ablation path: SI branch zeroed still trains, but the SI input is flat
    ag::zero_grad(m.ps.params());
    s1.zero_si = true;
    auto lz = train::triplet_loss(m, data[0], s1, rng);
    CHECK(std::isfinite(lz->val.v[0]));
}

TEST_CASE("train_stage: loss drops, stage 1 leaves the interpolator bit-identical") {
    DeepModel m(CodecConfig::toy(), si::RifeConfig::toy(), 21, true);
    auto data = train::make_synthetic_dataset(6, 64, "translate", 17);

    std::map<std::string, Tensor> rife_before;
    for (auto& name : m.ps.names("rife.")) rife_before[name] = m.ps.all().at(name)->val;

    TrainConfig cfg = toy_cfg(1);
    cfg.max_epochs = 4;
    cfg.loss_csv = "/tmp/ddvc_loss.csv";
    cfg.checkpoint_path = "/tmp/ddvc_train.ckpt";
    auto res = train::train_stage(m, data, cfg);

    REQUIRE(res.train_loss.size() == 4);
    REQUIRE(res.val_loss.size() == 4);
    CHECK(res.best_epoch >= 0);
    CHECK(res.train_loss.back() < res.train_loss.front());
    for (double v : res.train_loss) CHECK(std::isfinite(v));

    for (auto& [name, before] : rife_before) {
        auto& after = m.ps.all().at(name)->val;
        REQUIRE(std::memcmp(before.v.data(), after.v.data(), before.size() * sizeof(float)) == 0);
    }

    std::ifstream csv(cfg.loss_csv);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "epoch,train_loss,val_loss,lr");
    int rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == 4);

    auto loaded = DeepModel::from_checkpoint(cfg.checkpoint_path);
    CHECK(loaded->cfg.m_latent == m.cfg.m_latent);
    std::remove(cfg.loss_csv.c_str());
    std::remove(cfg.checkpoint_path.c_str());
}

TEST_CASE("train_stage: plateau halves the lr and NaN aborts") {
    DeepModel m(CodecConfig::toy(), si::RifeConfig::toy(), 31, true);
    auto data = train::make_synthetic_dataset(4, 64, "translate", 23);

    TrainConfig cfg = toy_cfg(1);
    cfg.lr = 1e-20f;  // no visible improvement -> plateau fires
    cfg.patience = 1;
    cfg.max_epochs = 3;
    auto res = train::train_stage(m, data, cfg);
    CHECK(res.lr.back() < res.lr.front());
    CHECK(res.lr.back() == doctest::Approx(res.lr.front() / 2).epsilon(1e-6));

    auto& w = m.ps.all().begin()->second->val;
    w.v[0] = std::numeric_limits<float>::quiet_NaN();
    TrainConfig cfg2 = toy_cfg(1);
    cfg2.max_epochs = 1;
    CHECK_THROWS_AS(train::train_stage(m, data, cfg2), std::runtime_error);
}
