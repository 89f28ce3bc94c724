#pragma once

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "ddvc/tensor.hpp"

// Tape-based reverse-mode autodiff over CHW tensors. A Var is a shared
// node; ops build the graph eagerly and backward() walks it in reverse
// topological order. Nodes without any grad-requiring ancestor carry no
// tape, so frozen subnetworks cost only their forward pass.
namespace ddvc::ag {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad;
    bool req = false;
    std::vector<Var> parents;
    std::function<void(Node&)> back;

    void ensure_grad() {
        if (grad.size() != val.size()) grad = Tensor(val.c, val.h, val.w);
    }
};

Var leaf(Tensor t, bool requires_grad);
inline Var constant(Tensor t) { return leaf(std::move(t), false); }
Var detach(const Var& x);
Var make_node(Tensor val, std::vector<Var> parents, std::function<void(Node&)> back);

// Seeds root grad with ones and accumulates into every grad-requiring node.
void backward(const Var& root);
void zero_grad(const std::vector<Var>& params);

// elementwise
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, float s);
Var mul_scalar(const Var& a, float s);
Var lrelu(const Var& x, float slope = 0.1f);
Var sigmoid(const Var& x);
Var tanh_(const Var& x);
Var softplus(const Var& x);
Var square(const Var& x);
Var clamp01_ste(const Var& x);  // hard clamp value, pass-through gradient

// reductions
Var sum(const Var& x);
Var mse(const Var& a, const Var& b);

// structure
Var concat(const std::vector<Var>& xs);
Var slice_c(const Var& x, int c0, int c1);

// neural ops
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var deconv2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int outpad);
Var gdn(const Var& x, const Var& braw, const Var& graw, bool inverse);
Var warp(const Var& img, const Var& flow);
Var resize(const Var& x, int oh, int ow);
Var avgpool2(const Var& x);

// quantization surrogates
Var round_ste(const Var& y, const Var& mu);  // Round(y-mu)+mu, identity grad in y
Var add_uniform_noise(const Var& y, std::mt19937& rng);

// sum of -log2 P(round(y-mu)) under N(mu, sigma^2); input t = y - mu
// (integer symbols at eval time, noisy values during training)
Var gauss_bits_sum(const Var& t, const Var& sigma);

}  // namespace ddvc::ag
