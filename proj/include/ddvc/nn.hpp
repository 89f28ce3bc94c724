#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "ddvc/autograd.hpp"

namespace ddvc::nn {

// Named parameter registry. Parameters are created on first access with a
// deterministic seeded init, so architectures can be rebuilt and then
// overwritten from a checkpoint.
class ParamStore {
  public:
    explicit ParamStore(uint32_t seed = 1234, bool trainable = true)
        : rng_(seed), trainable_(trainable) {}

    ag::Var get(const std::string& name, int c, int h, int w, float init_lo, float init_hi);
    ag::Var get_const_init(const std::string& name, int c, int h, int w, float value);

    bool has(const std::string& name) const { return map_.count(name) != 0; }
    std::vector<ag::Var> params(const std::string& prefix = "") const;
    std::vector<std::string> names(const std::string& prefix = "") const;
    const std::map<std::string, ag::Var>& all() const { return map_; }

    void set_tensor(const std::string& name, Tensor t);  // checkpoint load
    void set_trainable(bool t) { trainable_ = t; }

  private:
    std::map<std::string, ag::Var> map_;
    std::mt19937 rng_;
    bool trainable_;
};

struct Conv {
    ag::Var w, b;
    int stride = 1, pad = 0;
    Conv() = default;
    Conv(ParamStore& ps, const std::string& name, int ci, int co, int k, int stride);
    ag::Var operator()(const ag::Var& x) const { return ag::conv2d(x, w, b, stride, pad); }
};

struct Deconv {
    ag::Var w, b;
    int stride = 2, pad = 0, outpad = 0;
    Deconv() = default;
    Deconv(ParamStore& ps, const std::string& name, int ci, int co, int k, int stride);
    ag::Var operator()(const ag::Var& x) const {
        return ag::deconv2d(x, w, b, stride, pad, outpad);
    }
};

struct GDN {
    ag::Var braw, graw;
    bool inverse = false;
    GDN() = default;
    GDN(ParamStore& ps, const std::string& name, int channels, bool inverse);
    ag::Var operator()(const ag::Var& x) const { return ag::gdn(x, braw, graw, inverse); }
};

struct Adam {
    float lr = 1e-3f, beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
    float clip_norm = 5.f;  // global grad-norm clip, 0 disables
    std::vector<ag::Var> params;
    std::vector<Tensor> m, v;
    int t = 0;

    explicit Adam(std::vector<ag::Var> p, float lr);
    void step();
    void zero_grad() { ag::zero_grad(params); }
    double grad_norm() const;
};

}  // namespace ddvc::nn
