#include "ddvc/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "ddvc/kernels.hpp"
#include "ddvc/profile.hpp"

namespace ddvc::ag {

Var leaf(Tensor t, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->req = requires_grad;
    return n;
}

Var detach(const Var& x) { return constant(x->val); }

Var make_node(Tensor val, std::vector<Var> parents, std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    for (auto& p : parents)
        if (p->req) n->req = true;
    if (n->req) {
        n->parents = std::move(parents);
        n->back = std::move(back);
    }
    return n;
}

void backward(const Var& root) {
    if (root->val.size() != 1) throw std::logic_error("backward: root must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->req && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->grad.v[0] += 1.f;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->back) (*it)->back(**it);
}

void zero_grad(const std::vector<Var>& params) {
    for (auto& p : params) p->grad = Tensor();
}

// ------------------------------------------------------------- elementwise

static void check_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

Var add(const Var& a, const Var& b) {
    check_same(a->val, b->val, "add");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += b->val.v[i];
    return make_node(std::move(out), {a, b}, [](Node& n) {
        for (int k = 0; k < 2; ++k) {
            auto& p = n.parents[k];
            if (!p->req) continue;
            p->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) p->grad.v[i] += n.grad.v[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same(a->val, b->val, "sub");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= b->val.v[i];
    return make_node(std::move(out), {a, b}, [](Node& n) {
        for (int k = 0; k < 2; ++k) {
            auto& p = n.parents[k];
            if (!p->req) continue;
            p->ensure_grad();
            float s = k == 0 ? 1.f : -1.f;
            for (size_t i = 0; i < n.grad.size(); ++i) p->grad.v[i] += s * n.grad.v[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same(a->val, b->val, "mul");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] *= b->val.v[i];
    return make_node(std::move(out), {a, b}, [](Node& n) {
        auto &a = n.parents[0], &b = n.parents[1];
        if (a->req) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) a->grad.v[i] += n.grad.v[i] * b->val.v[i];
        }
        if (b->req) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) b->grad.v[i] += n.grad.v[i] * a->val.v[i];
        }
    });
}

Var add_scalar(const Var& a, float s) {
    Tensor out = a->val;
    for (auto& v : out.v) v += s;
    return make_node(std::move(out), {a}, [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad.v[i] += n.grad.v[i];
    });
}

Var mul_scalar(const Var& a, float s) {
    Tensor out = a->val;
    for (auto& v : out.v) v *= s;
    return make_node(std::move(out), {a}, [s](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad.v[i] += s * n.grad.v[i];
    });
}

Var lrelu(const Var& x, float slope) {
    Tensor out = x->val;
    for (auto& v : out.v) v = v >= 0.f ? v : slope * v;
    return make_node(std::move(out), {x}, [slope](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            p->grad.v[i] += n.grad.v[i] * (p->val.v[i] >= 0.f ? 1.f : slope);
    });
}

Var sigmoid(const Var& x) {
    Tensor out = x->val;
    for (auto& v : out.v) v = 1.f / (1.f + std::exp(-v));
    return make_node(std::move(out), {x}, [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            float s = n.val.v[i];
            p->grad.v[i] += n.grad.v[i] * s * (1.f - s);
        }
    });
}

Var tanh_(const Var& x) {
    Tensor out = x->val;
    for (auto& v : out.v) v = std::tanh(v);
    return make_node(std::move(out), {x}, [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            float t = n.val.v[i];
            p->grad.v[i] += n.grad.v[i] * (1.f - t * t);
        }
    });
}

Var softplus(const Var& x) {
    Tensor out = x->val;
    for (auto& v : out.v) v = v > 20.f ? v : std::log1p(std::exp(v));
    return make_node(std::move(out), {x}, [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            p->grad.v[i] += n.grad.v[i] / (1.f + std::exp(-p->val.v[i]));
    });
}

Var square(const Var& x) {
    Tensor out = x->val;
    for (auto& v : out.v) v *= v;
    return make_node(std::move(out), {x}, [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            p->grad.v[i] += n.grad.v[i] * 2.f * p->val.v[i];
    });
}

Var clamp01_ste(const Var& x) {
    Tensor out = x->val;
    for (auto& v : out.v) v = std::clamp(v, 0.f, 1.f);
    return make_node(std::move(out), {x}, [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad.v[i] += n.grad.v[i];
    });
}

// ------------------------------------------------------------- reductions

Var sum(const Var& x) {
    double acc = 0;
    for (float v : x->val.v) acc += v;
    return make_node(Tensor::scalar(float(acc)), {x}, [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        float g = n.grad.v[0];
        for (auto& gv : p->grad.v) gv += g;
    });
}

Var mse(const Var& a, const Var& b) {
    check_same(a->val, b->val, "mse");
    double acc = 0;
    for (size_t i = 0; i < a->val.size(); ++i) {
        double d = double(a->val.v[i]) - b->val.v[i];
        acc += d * d;
    }
    float n_elems = float(a->val.size());
    return make_node(Tensor::scalar(float(acc / n_elems)), {a, b}, [n_elems](Node& n) {
        auto &a = n.parents[0], &b = n.parents[1];
        float g = n.grad.v[0] * 2.f / n_elems;
        if (a->req) a->ensure_grad();
        if (b->req) b->ensure_grad();
        for (size_t i = 0; i < a->val.size(); ++i) {
            float d = a->val.v[i] - b->val.v[i];
            if (a->req) a->grad.v[i] += g * d;
            if (b->req) b->grad.v[i] -= g * d;
        }
    });
}

// ------------------------------------------------------------- structure

Var concat(const std::vector<Var>& xs) {
    int c = 0;
    for (auto& x : xs) c += x->val.c;
    Tensor out(c, xs[0]->val.h, xs[0]->val.w);
    size_t off = 0;
    for (auto& x : xs) {
        check_same(Tensor(1, x->val.h, x->val.w), Tensor(1, out.h, out.w), "concat");
        std::copy(x->val.v.begin(), x->val.v.end(), out.v.begin() + off);
        off += x->val.size();
    }
    return make_node(std::move(out), xs, [](Node& n) {
        size_t off = 0;
        for (auto& p : n.parents) {
            if (p->req) {
                p->ensure_grad();
                for (size_t i = 0; i < p->val.size(); ++i) p->grad.v[i] += n.grad.v[off + i];
            }
            off += p->val.size();
        }
    });
}

Var slice_c(const Var& x, int c0, int c1) {
    Tensor out(c1 - c0, x->val.h, x->val.w);
    size_t plane = size_t(x->val.h) * x->val.w;
    std::copy(x->val.v.begin() + c0 * plane, x->val.v.begin() + c1 * plane, out.v.begin());
    return make_node(std::move(out), {x}, [c0, plane](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad.v[c0 * plane + i] += n.grad.v[i];
    });
}

// ------------------------------------------------------------- neural ops

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    Tensor out;
    kern::conv2d_fwd(x->val, w->val, b->val, stride, pad, out);
    prof::add_flops(2ull * w->val.w * w->val.h * w->val.c * out.h * out.w);
    int in_c = x->val.c, in_h = x->val.h, in_w = x->val.w;
    return make_node(std::move(out), {x, w, b}, [stride, pad, in_c, in_h, in_w](Node& n) {
        auto &x = n.parents[0], &w = n.parents[1], &b = n.parents[2];
        if (x->req) {
            Tensor gin(in_c, in_h, in_w);
            kern::conv2d_bwd_input(n.grad, w->val, stride, pad, gin);
            x->ensure_grad();
            for (size_t i = 0; i < gin.size(); ++i) x->grad.v[i] += gin.v[i];
        }
        if (w->req) {
            Tensor gw(w->val.c, w->val.h, w->val.w), gb(b->val.c, 1, 1);
            kern::conv2d_bwd_weight(x->val, n.grad, stride, pad, gw, gb);
            w->ensure_grad();
            b->ensure_grad();
            for (size_t i = 0; i < gw.size(); ++i) w->grad.v[i] += gw.v[i];
            for (size_t i = 0; i < gb.size(); ++i) b->grad.v[i] += gb.v[i];
        }
    });
}

Var deconv2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int outpad) {
    Tensor out;
    kern::deconv2d_fwd(x->val, w->val, b->val, stride, pad, outpad, out);
    prof::add_flops(2ull * w->val.w * w->val.h * w->val.c * x->val.h * x->val.w);
    int in_c = x->val.c, in_h = x->val.h, in_w = x->val.w;
    return make_node(std::move(out), {x, w, b}, [stride, pad, outpad, in_c, in_h, in_w](Node& n) {
        auto &x = n.parents[0], &w = n.parents[1], &b = n.parents[2];
        if (x->req) {
            Tensor gin(in_c, in_h, in_w);
            kern::deconv2d_bwd_input(n.grad, w->val, stride, pad, outpad, gin);
            x->ensure_grad();
            for (size_t i = 0; i < gin.size(); ++i) x->grad.v[i] += gin.v[i];
        }
        if (w->req) {
            Tensor gw(w->val.c, w->val.h, w->val.w), gb(b->val.c, 1, 1);
            kern::deconv2d_bwd_weight(x->val, n.grad, stride, pad, outpad, gw, gb);
            w->ensure_grad();
            b->ensure_grad();
            for (size_t i = 0; i < gw.size(); ++i) w->grad.v[i] += gw.v[i];
            for (size_t i = 0; i < gb.size(); ++i) b->grad.v[i] += gb.v[i];
        }
    });
}

Var gdn(const Var& x, const Var& braw, const Var& graw, bool inverse) {
    Tensor out;
    kern::gdn_fwd(x->val, braw->val, graw->val, inverse, out);
    prof::add_flops(2ull * x->val.c * x->val.size());
    return make_node(std::move(out), {x, braw, graw}, [inverse](Node& n) {
        auto &x = n.parents[0], &braw = n.parents[1], &graw = n.parents[2];
        Tensor gx, gb, gg;
        kern::gdn_bwd(x->val, braw->val, graw->val, inverse, n.grad, gx, gb, gg);
        if (x->req) {
            x->ensure_grad();
            for (size_t i = 0; i < gx.size(); ++i) x->grad.v[i] += gx.v[i];
        }
        if (braw->req) {
            braw->ensure_grad();
            graw->ensure_grad();
            for (size_t i = 0; i < gb.size(); ++i) braw->grad.v[i] += gb.v[i];
            for (size_t i = 0; i < gg.size(); ++i) graw->grad.v[i] += gg.v[i];
        }
    });
}

Var warp(const Var& img, const Var& flow) {
    Tensor out;
    kern::warp_fwd(img->val, flow->val, out);
    prof::add_flops(8ull * img->val.size());
    return make_node(std::move(out), {img, flow}, [](Node& n) {
        auto &img = n.parents[0], &flow = n.parents[1];
        Tensor gimg, gflow;
        kern::warp_bwd(img->val, flow->val, n.grad, gimg, gflow);
        if (img->req) {
            img->ensure_grad();
            for (size_t i = 0; i < gimg.size(); ++i) img->grad.v[i] += gimg.v[i];
        }
        if (flow->req) {
            flow->ensure_grad();
            for (size_t i = 0; i < gflow.size(); ++i) flow->grad.v[i] += gflow.v[i];
        }
    });
}

Var resize(const Var& x, int oh, int ow) {
    if (oh == x->val.h && ow == x->val.w) return x;
    Tensor out;
    kern::resize_bilinear_fwd(x->val, oh, ow, out);
    int ih = x->val.h, iw = x->val.w;
    return make_node(std::move(out), {x}, [ih, iw](Node& n) {
        auto& p = n.parents[0];
        Tensor gin;
        kern::resize_bilinear_bwd(n.grad, ih, iw, gin);
        p->ensure_grad();
        for (size_t i = 0; i < gin.size(); ++i) p->grad.v[i] += gin.v[i];
    });
}

Var avgpool2(const Var& x) {
    Tensor out;
    kern::avgpool2_fwd(x->val, out);
    return make_node(std::move(out), {x}, [](Node& n) {
        auto& p = n.parents[0];
        Tensor gin;
        kern::avgpool2_bwd(n.grad, gin);
        p->ensure_grad();
        for (size_t i = 0; i < gin.size(); ++i) p->grad.v[i] += gin.v[i];
    });
}

// ------------------------------------------------------------- quantizers

Var round_ste(const Var& y, const Var& mu) {
    check_same(y->val, mu->val, "round_ste");
    Tensor out = y->val;
    for (size_t i = 0; i < out.size(); ++i)
        out.v[i] = std::nearbyint(out.v[i] - mu->val.v[i]) + mu->val.v[i];
    return make_node(std::move(out), {y, mu}, [](Node& n) {
        auto& y = n.parents[0];
        if (!y->req) return;
        y->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) y->grad.v[i] += n.grad.v[i];
    });
}

Var add_uniform_noise(const Var& y, std::mt19937& rng) {
    std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
    Tensor out = y->val;
    for (auto& v : out.v) v += dist(rng);
    return make_node(std::move(out), {y}, [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad.v[i] += n.grad.v[i];
    });
}

// ------------------------------------------------------------- rate terms

static inline double norm_cdf(double u) { return 0.5 * std::erfc(-u / std::sqrt(2.0)); }
static inline double norm_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI); }

Var gauss_bits_sum(const Var& t, const Var& sigma) {
    check_same(t->val, sigma->val, "gauss_bits_sum");
    constexpr double kPmin = 1e-9;
    const double inv_ln2 = 1.0 / std::log(2.0);
    double bits = 0;
    for (size_t i = 0; i < t->val.size(); ++i) {
        double s = sigma->val.v[i];
        double p = norm_cdf((t->val.v[i] + 0.5) / s) - norm_cdf((t->val.v[i] - 0.5) / s);
        bits -= std::log(std::max(p, kPmin)) * inv_ln2;
    }
    return make_node(Tensor::scalar(float(bits)), {t, sigma}, [inv_ln2](Node& n) {
        auto &t = n.parents[0], &sigma = n.parents[1];
        float g = n.grad.v[0];
        if (t->req) t->ensure_grad();
        if (sigma->req) sigma->ensure_grad();
        for (size_t i = 0; i < t->val.size(); ++i) {
            double s = sigma->val.v[i];
            double up = (t->val.v[i] + 0.5) / s, um = (t->val.v[i] - 0.5) / s;
            double p = std::max(norm_cdf(up) - norm_cdf(um), 1e-9);
            double dbits_dp = -inv_ln2 / p;
            if (t->req) t->grad.v[i] += float(g * dbits_dp * (norm_pdf(up) - norm_pdf(um)) / s);
            if (sigma->req)
                sigma->grad.v[i] +=
                    float(g * dbits_dp * (-(norm_pdf(up) * up - norm_pdf(um) * um) / s));
        }
    });
}

}  // namespace ddvc::ag
