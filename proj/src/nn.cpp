#include "ddvc/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace ddvc::nn {

ag::Var ParamStore::get(const std::string& name, int c, int h, int w, float init_lo,
                        float init_hi) {
    auto it = map_.find(name);
    if (it != map_.end()) return it->second;
    Tensor t(c, h, w);
    std::uniform_real_distribution<float> dist(init_lo, init_hi);
    for (auto& v : t.v) v = dist(rng_);
    auto var = ag::leaf(std::move(t), trainable_);
    map_[name] = var;
    return var;
}

ag::Var ParamStore::get_const_init(const std::string& name, int c, int h, int w, float value) {
    auto it = map_.find(name);
    if (it != map_.end()) return it->second;
    Tensor t(c, h, w);
    t.fill(value);
    auto var = ag::leaf(std::move(t), trainable_);
    map_[name] = var;
    return var;
}

std::vector<ag::Var> ParamStore::params(const std::string& prefix) const {
    std::vector<ag::Var> out;
    for (auto& [k, v] : map_)
        if (k.rfind(prefix, 0) == 0) out.push_back(v);
    return out;
}

std::vector<std::string> ParamStore::names(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto& [k, v] : map_)
        if (k.rfind(prefix, 0) == 0) out.push_back(k);
    return out;
}

void ParamStore::set_tensor(const std::string& name, Tensor t) {
    auto it = map_.find(name);
    if (it == map_.end()) {
        map_[name] = ag::leaf(std::move(t), trainable_);
        return;
    }
    if (it->second->val.size() != t.size())
        throw std::runtime_error("checkpoint tensor size mismatch for " + name);
    it->second->val = std::move(t);
}

Conv::Conv(ParamStore& ps, const std::string& name, int ci, int co, int k, int stride_)
    : stride(stride_), pad(k / 2) {
    float a = 1.f / std::sqrt(float(ci) * k * k);
    w = ps.get(name + ".w", co, ci, k * k, -a, a);
    b = ps.get(name + ".b", co, 1, 1, -a, a);
}

Deconv::Deconv(ParamStore& ps, const std::string& name, int ci, int co, int k, int stride_)
    : stride(stride_), pad(k / 2), outpad(stride_ - 1 - (k % 2 == 0 ? 1 : 0)) {
    float a = 1.f / std::sqrt(float(ci) * k * k);
    w = ps.get(name + ".w", ci, co, k * k, -a, a);
    b = ps.get(name + ".b", co, 1, 1, -a, a);
}

GDN::GDN(ParamStore& ps, const std::string& name, int channels, bool inverse_) : inverse(inverse_) {
    braw = ps.get_const_init(name + ".braw", channels, 1, 1, 1.f);
    if (!ps.has(name + ".graw")) {
        // gamma = 0.1 on the diagonal, 1e-3 elsewhere (nonzero so the
        // squared reparameterization keeps a live gradient)
        Tensor g(channels, channels, 1);
        for (int i = 0; i < channels; ++i)
            for (int j = 0; j < channels; ++j)
                g.at(i, j, 0) = i == j ? std::sqrt(0.1f) : std::sqrt(1e-3f);
        ag::Var var = ps.get_const_init(name + ".graw", channels, channels, 1, 0.f);
        var->val = std::move(g);
        graw = var;
    } else {
        graw = ps.get_const_init(name + ".graw", channels, channels, 1, 0.f);
    }
}

Adam::Adam(std::vector<ag::Var> p, float lr_) : lr(lr_), params(std::move(p)) {
    for (auto& pv : params) {
        m.emplace_back(pv->val.c, pv->val.h, pv->val.w);
        v.emplace_back(pv->val.c, pv->val.h, pv->val.w);
    }
}

double Adam::grad_norm() const {
    double acc = 0;
    for (auto& p : params)
        if (p->grad.size())
            for (float g : p->grad.v) acc += double(g) * g;
    return std::sqrt(acc);
}

void Adam::step() {
    ++t;
    float scale = 1.f;
    if (clip_norm > 0.f) {
        double n = grad_norm();
        if (n > clip_norm) scale = float(clip_norm / n);
    }
    const float bc1 = 1.f - std::pow(beta1, float(t));
    const float bc2 = 1.f - std::pow(beta2, float(t));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p->grad.size()) continue;
        for (size_t j = 0; j < p->val.size(); ++j) {
            float g = p->grad.v[j] * scale;
            m[i].v[j] = beta1 * m[i].v[j] + (1.f - beta1) * g;
            v[i].v[j] = beta2 * v[i].v[j] + (1.f - beta2) * g * g;
            float mh = m[i].v[j] / bc1, vh = v[i].v[j] / bc2;
            p->val.v[j] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

}  // namespace ddvc::nn
