#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace ddvc {

// Dense CHW float tensor. Batch handling is done by looping over samples.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, 0.f) {}

    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    float& at(int ci, int y, int x) { return v[(size_t(ci) * h + y) * w + x]; }
    float at(int ci, int y, int x) const { return v[(size_t(ci) * h + y) * w + x]; }

    float* plane(int ci) { return v.data() + size_t(ci) * h * w; }
    const float* plane(int ci) const { return v.data() + size_t(ci) * h * w; }

    void fill(float x) { std::fill(v.begin(), v.end(), x); }

    static Tensor scalar(float x) {
        Tensor t(1, 1, 1);
        t.v[0] = x;
        return t;
    }
    float item() const {
        assert(size() == 1);
        return v[0];
    }
};

}  // namespace ddvc
