#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#include "ddvc/kernels.hpp"

using namespace ddvc;
using Clock = std::chrono::steady_clock;

static Tensor rand_tensor(int c, int h, int w, std::mt19937& rng) {
    Tensor t(c, h, w);
    std::uniform_real_distribution<float> u(-1.f, 1.f);
    for (auto& v : t.v) v = u(rng);
    return t;
}

template <typename Fn>
static double best_ms(Fn&& fn, int reps) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        auto t0 = Clock::now();
        fn();
        best = std::min(best,
                        std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
    return best;
}

int main(int argc, char** argv) {
    int size = argc > 1 ? std::atoi(argv[1]) : 128;
    int reps = argc > 2 ? std::atoi(argv[2]) : 5;
    std::mt19937 rng(1);

    std::printf("kernel benchmark, %dx%d inputs, best of %d, %d thread(s)\n", size, size, reps,
                kern::threads());
    std::printf("%-28s %10s %10s %8s %8s\n", "kernel", "serial ms", "omp ms", "speedup",
                "match");

    auto row = [&](const char* name, auto serial, auto omp, const Tensor& a, const Tensor& b) {
        double ts = best_ms(serial, reps);
        double to = best_ms(omp, reps);
        bool same = a.size() == b.size() &&
                    std::memcmp(a.v.data(), b.v.data(), a.size() * sizeof(float)) == 0;
        std::printf("%-28s %10.3f %10.3f %7.2fx %8s\n", name, ts, to, ts / to,
                    same ? "exact" : "DIFF");
    };

    {
        Tensor x = rand_tensor(16, size, size, rng);
        Tensor w = rand_tensor(32, 16, 25, rng);
        Tensor b = rand_tensor(32, 1, 1, rng);
        Tensor o1, o2;
        row("conv2d 5x5 s2 16->32",
            [&] { kern::conv2d_fwd_serial(x, w, b, 2, 2, o1); },
            [&] { kern::conv2d_fwd_omp(x, w, b, 2, 2, o2); }, o1, o2);
    }
    {
        Tensor x = rand_tensor(32, size / 2, size / 2, rng);
        Tensor w = rand_tensor(32, 16, 25, rng);
        Tensor b = rand_tensor(16, 1, 1, rng);
        Tensor o1, o2;
        row("deconv2d 5x5 s2 32->16",
            [&] { kern::deconv2d_fwd_serial(x, w, b, 2, 2, 1, o1); },
            [&] { kern::deconv2d_fwd_omp(x, w, b, 2, 2, 1, o2); }, o1, o2);
    }
    {
        Tensor img = rand_tensor(3, size, size, rng);
        Tensor flow = rand_tensor(2, size, size, rng);
        for (auto& v : flow.v) v *= 4.f;
        Tensor o1, o2;
        row("warp bilinear 3ch",
            [&] { kern::warp_fwd_serial(img, flow, o1); },
            [&] { kern::warp_fwd_omp(img, flow, o2); }, o1, o2);
    }
    return 0;
}
