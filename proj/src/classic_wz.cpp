#include "ddvc/classic_wz.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "ddvc/si_gen.hpp"

namespace ddvc::classic {

// ------------------------------------------------------------------ DCT

namespace {
// orthonormal 4-point DCT-II basis
const double kC[4][4] = {
    {0.5, 0.5, 0.5, 0.5},
    {0.6532814824381883, 0.2705980500730985, -0.2705980500730985, -0.6532814824381883},
    {0.5, -0.5, -0.5, 0.5},
    {0.2705980500730985, -0.6532814824381883, 0.6532814824381883, -0.2705980500730985}};
}  // namespace

Tensor dct4(const Tensor& plane) {
    if (plane.c != 1 || plane.h % 4 || plane.w % 4)
        throw std::invalid_argument("dct4: need (1,H,W) with H,W divisible by 4");
    const int bh = plane.h / 4, bw = plane.w / 4;
    Tensor out(16, bh, bw);
    for (int by = 0; by < bh; ++by)
        for (int bx = 0; bx < bw; ++bx) {
            double tmp[4][4], coef[4][4];
            for (int u = 0; u < 4; ++u)
                for (int x = 0; x < 4; ++x) {
                    double acc = 0;
                    for (int y = 0; y < 4; ++y)
                        acc += kC[u][y] * plane.at(0, by * 4 + y, bx * 4 + x);
                    tmp[u][x] = acc;
                }
            for (int u = 0; u < 4; ++u)
                for (int v = 0; v < 4; ++v) {
                    double acc = 0;
                    for (int x = 0; x < 4; ++x) acc += tmp[u][x] * kC[v][x];
                    coef[u][v] = acc;
                }
            for (int u = 0; u < 4; ++u)
                for (int v = 0; v < 4; ++v) out.at(u * 4 + v, by, bx) = float(coef[u][v]);
        }
    return out;
}

Tensor idct4(const Tensor& bands) {
    if (bands.c != 16) throw std::invalid_argument("idct4: need 16 bands");
    const int bh = bands.h, bw = bands.w;
    Tensor out(1, bh * 4, bw * 4);
    for (int by = 0; by < bh; ++by)
        for (int bx = 0; bx < bw; ++bx) {
            double tmp[4][4];
            for (int u = 0; u < 4; ++u)
                for (int x = 0; x < 4; ++x) {
                    double acc = 0;
                    for (int v = 0; v < 4; ++v) acc += bands.at(u * 4 + v, by, bx) * kC[v][x];
                    tmp[u][x] = acc;
                }
            for (int y = 0; y < 4; ++y)
                for (int x = 0; x < 4; ++x) {
                    double acc = 0;
                    for (int u = 0; u < 4; ++u) acc += kC[u][y] * tmp[u][x];
                    out.at(0, by * 4 + y, bx * 4 + x) = float(acc);
                }
        }
    return out;
}

// ------------------------------------------------------------ quantizers

const QualityPreset& preset(int quality) {
    static const std::array<QualityPreset, kQualityCount> presets{{
        {3, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
        {4, 2, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
        {4, 2, 1, 0, 2, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0},
        {5, 3, 2, 0, 3, 2, 1, 0, 2, 1, 0, 0, 0, 0, 0, 0},
        {5, 3, 2, 1, 3, 2, 2, 1, 2, 2, 1, 0, 1, 1, 0, 0},
        {6, 4, 3, 2, 4, 3, 2, 1, 3, 2, 2, 1, 2, 1, 1, 0},
        {6, 4, 3, 2, 4, 3, 3, 2, 3, 3, 2, 2, 2, 2, 2, 1},
        {7, 5, 4, 3, 5, 4, 3, 3, 4, 3, 3, 2, 3, 3, 2, 2},
    }};
    if (quality < 0 || quality >= kQualityCount)
        throw std::invalid_argument("quality preset out of range");
    return presets[size_t(quality)];
}

// --------------------------------------------------------------- LDPCA

uint8_t crc8(const uint8_t* data, size_t n) {
    uint8_t crc = 0;
    for (size_t i = 0; i < n; ++i) {
        crc ^= data[i];
        for (int b = 0; b < 8; ++b) crc = (crc & 0x80) ? uint8_t((crc << 1) ^ 0x07) : uint8_t(crc << 1);
    }
    return crc;
}

namespace {
constexpr int kWords = kLdpcaN / 64;

int bitrev10(int i) {
    int r = 0;
    for (int b = 0; b < 10; ++b)
        if (i & (1 << b)) r |= 1 << (9 - b);
    return r;
}

// Gauss-Jordan inverse over GF(2); false if singular.
bool invert(std::vector<std::array<uint64_t, kWords>> m,
            std::vector<std::array<uint64_t, kWords>>& inv) {
    const int n = kLdpcaN;
    inv.assign(size_t(n), std::array<uint64_t, kWords>{});
    for (int i = 0; i < n; ++i) inv[size_t(i)][size_t(i / 64)] = 1ull << (i % 64);
    for (int col = 0; col < n; ++col) {
        int piv = -1;
        for (int r = col; r < n; ++r)
            if (m[size_t(r)][size_t(col / 64)] >> (col % 64) & 1) {
                piv = r;
                break;
            }
        if (piv < 0) return false;
        std::swap(m[size_t(col)], m[size_t(piv)]);
        std::swap(inv[size_t(col)], inv[size_t(piv)]);
        for (int r = 0; r < n; ++r) {
            if (r == col || !(m[size_t(r)][size_t(col / 64)] >> (col % 64) & 1)) continue;
            for (int w = 0; w < kWords; ++w) {
                m[size_t(r)][size_t(w)] ^= m[size_t(col)][size_t(w)];
                inv[size_t(r)][size_t(w)] ^= inv[size_t(col)][size_t(w)];
            }
        }
    }
    return true;
}
}  // namespace

Ldpca::Ldpca() {
    // Bit-reversed reveal spreads the syndrome positions uniformly at any
    // prefix length; the final position comes first so the merged checks
    // always cover every row of H.
    reveal_order_.resize(kLdpcaN);
    for (int i = 0; i < kLdpcaN; ++i) reveal_order_[size_t(i)] = bitrev10(i);
    std::swap(reveal_order_.front(), reveal_order_.back());

    // (3,3)-regular H: identity plus two random permutations with no
    // collisions, so every row and every column has degree exactly 3.
    // Retry seeds until the overlay is collision-free and H is invertible.
    for (uint32_t seed = 7001;; ++seed) {
        std::mt19937 rng(seed);
        std::vector<int> p1(kLdpcaN), p2(kLdpcaN);
        for (int i = 0; i < kLdpcaN; ++i) p1[size_t(i)] = p2[size_t(i)] = i;
        std::shuffle(p1.begin(), p1.end(), rng);
        std::shuffle(p2.begin(), p2.end(), rng);
        bool clash = false;
        for (int i = 0; i < kLdpcaN && !clash; ++i)
            clash = p1[size_t(i)] == i || p2[size_t(i)] == i || p1[size_t(i)] == p2[size_t(i)];
        if (clash) continue;

        rows_.clear();
        std::vector<std::array<uint64_t, kWords>> m(kLdpcaN, std::array<uint64_t, kWords>{});
        for (int r = 0; r < kLdpcaN; ++r) {
            std::array<int, 3> cols{r, p1[size_t(r)], p2[size_t(r)]};
            std::sort(cols.begin(), cols.end());
            rows_.push_back(cols);
            for (int c : cols) m[size_t(r)][size_t(c / 64)] ^= 1ull << (c % 64);
        }
        if (invert(std::move(m), inv_)) break;
        rows_.clear();
    }
}

const Ldpca& Ldpca::instance() {
    static const Ldpca inst;
    return inst;
}

std::vector<uint8_t> Ldpca::syndromes(const std::vector<uint8_t>& bits) const {
    if (int(bits.size()) != kLdpcaN) throw std::invalid_argument("ldpca: block length");
    std::vector<uint8_t> acc(kLdpcaN);
    uint8_t run = 0;
    for (int i = 0; i < kLdpcaN; ++i) {
        const auto& r = rows_[size_t(i)];
        run ^= uint8_t(bits[size_t(r[0])] ^ bits[size_t(r[1])] ^ bits[size_t(r[2])]);
        acc[size_t(i)] = run;
    }
    std::vector<uint8_t> out(kLdpcaN);
    for (int k = 0; k < kLdpcaN; ++k) out[size_t(k)] = acc[size_t(reveal_order_[size_t(k)])];
    return out;
}

bool Ldpca::decode(const std::vector<double>& llr, const std::vector<uint8_t>& revealed,
                   int chunks, std::vector<uint8_t>& out) const {
    const int n = kLdpcaN;
    const int k = chunks * kLdpcaChunk;
    if (int(llr.size()) != n || int(revealed.size()) < k)
        throw std::invalid_argument("ldpca decode inputs");

    // accumulated syndrome values by natural position
    std::vector<int8_t> acc(size_t(n), -1);
    for (int i = 0; i < k; ++i) acc[size_t(reveal_order_[size_t(i)])] = int8_t(revealed[size_t(i)]);

    if (chunks >= kLdpcaChunks) {  // full reveal: solve H x = s exactly
        std::array<uint64_t, kWords> s{};
        uint8_t prev = 0;
        for (int i = 0; i < n; ++i) {
            uint8_t si = uint8_t(acc[size_t(i)]) ^ prev;
            prev = uint8_t(acc[size_t(i)]);
            if (si) s[size_t(i / 64)] |= 1ull << (i % 64);
        }
        out.assign(size_t(n), 0);
        for (int j = 0; j < n; ++j) {
            uint64_t parity = 0;
            for (int w = 0; w < kWords; ++w) parity ^= inv_[size_t(j)][size_t(w)] & s[size_t(w)];
            out[size_t(j)] = uint8_t(__builtin_popcountll(parity) & 1);
        }
        return true;
    }

    // merged checks between consecutive revealed accumulated syndromes
    std::vector<std::vector<int>> checks;
    std::vector<uint8_t> cval;
    {
        std::vector<uint8_t> cnt(size_t(n), 0);
        int prev_pos = -1;
        uint8_t prev_val = 0;
        for (int pos = 0; pos < n; ++pos) {
            if (acc[size_t(pos)] < 0) continue;
            std::vector<int> touched;
            for (int r = prev_pos + 1; r <= pos; ++r)
                for (int c : rows_[size_t(r)]) {
                    if (!cnt[size_t(c)]) touched.push_back(c);
                    cnt[size_t(c)] ^= 1;
                }
            std::vector<int> support;
            for (int c : touched) {
                if (cnt[size_t(c)]) support.push_back(c);
                cnt[size_t(c)] = 0;
            }
            if (!support.empty()) {
                std::sort(support.begin(), support.end());
                checks.push_back(std::move(support));
                cval.push_back(uint8_t(acc[size_t(pos)]) ^ prev_val);
            }
            prev_val = uint8_t(acc[size_t(pos)]);
            prev_pos = pos;
        }
    }

    // belief propagation with the tanh rule
    std::vector<std::vector<double>> r_msg(checks.size());
    for (size_t c = 0; c < checks.size(); ++c) r_msg[c].assign(checks[c].size(), 0.0);
    std::vector<double> post(llr);
    out.assign(size_t(n), 0);

    for (int iter = 0; iter < 100; ++iter) {
        for (size_t c = 0; c < checks.size(); ++c) {
            const auto& vars = checks[c];
            const size_t d = vars.size();
            std::vector<double> t(d), fwd(d), bwd(d);
            for (size_t e = 0; e < d; ++e) {
                double q = post[size_t(vars[e])] - r_msg[c][e];
                t[e] = std::tanh(0.5 * std::clamp(q, -38.0, 38.0));
            }
            fwd[0] = t[0];
            for (size_t e = 1; e < d; ++e) fwd[e] = fwd[e - 1] * t[e];
            bwd[d - 1] = t[d - 1];
            for (size_t e = d - 1; e-- > 0;) bwd[e] = bwd[e + 1] * t[e];
            double sign = cval[c] ? -1.0 : 1.0;
            for (size_t e = 0; e < d; ++e) {
                double rest = 1.0;
                if (e > 0) rest *= fwd[e - 1];
                if (e + 1 < d) rest *= bwd[e + 1];
                rest = std::clamp(sign * rest, -0.9999999999, 0.9999999999);
                double nr = std::log((1 + rest) / (1 - rest));  // 2*atanh
                post[size_t(vars[e])] += nr - r_msg[c][e];
                r_msg[c][e] = nr;
            }
        }
        for (int i = 0; i < n; ++i) out[size_t(i)] = post[size_t(i)] < 0 ? 1 : 0;
        bool ok = true;
        for (size_t c = 0; c < checks.size() && ok; ++c) {
            uint8_t parity = 0;
            for (int v : checks[c]) parity ^= out[size_t(v)];
            ok = parity == cval[c];
        }
        if (ok) return true;
    }
    return false;
}

// ----------------------------------------------------- Slepian-Wolf trial

namespace {
double bin_entropy(double p) {
    if (p <= 0 || p >= 1) return 0;
    return -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

// deterministic incremental-rate decode; returns chunks used (65 = failed)
int decode_with_feedback(const Ldpca& code, const std::vector<double>& llr,
                         const std::vector<uint8_t>& revealed, const std::vector<uint8_t>& truth,
                         std::vector<uint8_t>& out) {
    double h = 0;
    for (double l : llr) h += bin_entropy(1.0 / (1.0 + std::exp(std::fabs(l))));
    h /= double(llr.size());
    int start = std::clamp(int(std::ceil(h * kLdpcaChunks)), 1, kLdpcaChunks);
    for (int chunks = start; chunks <= kLdpcaChunks; ++chunks) {
        if (code.decode(llr, revealed, chunks, out) && out == truth) return chunks;
    }
    return kLdpcaChunks + 1;
}
}  // namespace

SwResult sw_rate_trial(double p, std::mt19937& rng) {
    const auto& code = Ldpca::instance();
    std::vector<uint8_t> x(kLdpcaN);
    std::vector<double> llr(kLdpcaN);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double mag = std::log((1 - p) / p);
    for (int i = 0; i < kLdpcaN; ++i) {
        x[size_t(i)] = uint8_t(rng() & 1);
        uint8_t y = u(rng) < p ? uint8_t(x[size_t(i)] ^ 1) : x[size_t(i)];
        llr[size_t(i)] = y ? -mag : mag;
    }
    auto revealed = code.syndromes(x);
    std::vector<uint8_t> out;
    int chunks = decode_with_feedback(code, llr, revealed, x, out);
    SwResult r;
    if (chunks <= kLdpcaChunks) {
        r.rate = double(chunks * kLdpcaChunk) / kLdpcaN;
        r.ok = true;
    }
    return r;
}

// ----------------------------------------------------------- frame codec

namespace {

double lap_cdf(double t, double mu, double alpha) {
    return t < mu ? 0.5 * std::exp(alpha * (t - mu)) : 1.0 - 0.5 * std::exp(-alpha * (t - mu));
}

struct ByteWriter {
    std::vector<uint8_t> b;
    void u8(uint8_t v) { b.push_back(v); }
    void f32(float v) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        for (int i = 0; i < 4; ++i) b.push_back(uint8_t(u >> (8 * i)));
    }
};

struct ByteReader {
    const std::vector<uint8_t>& b;
    size_t pos = 0;
    uint8_t u8() {
        if (pos >= b.size()) throw container::ContainerError("classic: truncated substream");
        return b[pos++];
    }
    float f32() {
        if (pos + 4 > b.size()) throw container::ContainerError("classic: truncated substream");
        uint32_t u = 0;
        for (int i = 0; i < 4; ++i) u |= uint32_t(b[pos + size_t(i)]) << (8 * i);
        pos += 4;
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
};

std::vector<uint8_t> pack_bits(const std::vector<uint8_t>& bits, size_t count) {
    std::vector<uint8_t> out((count + 7) / 8, 0);
    for (size_t i = 0; i < count; ++i)
        if (bits[i]) out[i / 8] |= uint8_t(1u << (i % 8));
    return out;
}

// per-band coefficient pool: channel-major, block-row-major
std::vector<float> gather_band(const std::vector<Tensor>& bands, int band) {
    std::vector<float> v;
    v.reserve(bands.size() * size_t(bands[0].h) * bands[0].w);
    for (auto& t : bands) {
        const float* p = t.plane(band);
        v.insert(v.end(), p, p + size_t(t.h) * t.w);
    }
    return v;
}

// LLRs for bit plane `b` given side information and decoded higher planes
std::vector<double> plane_llrs(const std::vector<float>& si, const std::vector<int>& hi_bits,
                               size_t off, size_t len, int bits, int b, double mn, double width,
                               double alpha) {
    const int L = 1 << bits;
    std::vector<double> llr(kLdpcaN, 38.0);  // padding bits are known zeros
    for (size_t i = 0; i < len; ++i) {
        double y = si[off + i];
        int prefix = hi_bits[off + i];
        int lo_cell = prefix << (b + 1), n_cells = 1 << (b + 1);
        double p0 = 0, p1 = 0;
        for (int c = 0; c < n_cells; ++c) {
            int cell = lo_cell + c;
            double lo = cell == 0 ? -1e30 : mn + cell * width;
            double hi = cell == L - 1 ? 1e30 : mn + (cell + 1) * width;
            double mass = lap_cdf(hi, y, alpha) - lap_cdf(lo, y, alpha);
            if ((cell >> b) & 1)
                p1 += mass;
            else
                p0 += mass;
        }
        double l = std::log(std::max(p0, 1e-300)) - std::log(std::max(p1, 1e-300));
        llr[i] = std::clamp(l, -38.0, 38.0);
    }
    return llr;
}

struct PlaneCode {
    int chunks = 0;
    std::vector<uint8_t> revealed;  // reveal-order bits, chunks*16 of them
    uint8_t crc = 0;
};

// WZ frame coding shared state. The encoder calls code() with the true
// coefficients; the decoder calls decode() with the stored syndromes. Both
// walk bands, blocks and planes in the same order, so the reconstruction is
// identical on both sides.
struct BandPipe {
    int bits;
    double mn, width, alpha;
    size_t count;  // coefficients in the band pool

    size_t blocks() const { return (count + kLdpcaN - 1) / kLdpcaN; }
};

Tensor assemble(const std::vector<Tensor>& si_bands, const QualityPreset& qp,
                const std::vector<std::vector<int>>& idx_by_band,
                const std::vector<BandPipe>& pipes, int h, int w) {
    const int bh = si_bands[0].h, bw = si_bands[0].w;
    Tensor out(3, h, w);
    for (int ch = 0; ch < 3; ++ch) {
        Tensor bands(16, bh, bw);
        size_t coded = 0;
        for (int band = 0; band < 16; ++band) {
            const float* sip = si_bands[size_t(ch)].plane(band);
            float* bp = bands.plane(band);
            size_t plane_n = size_t(bh) * bw;
            if (qp[size_t(band)] == 0) {
                std::copy(sip, sip + plane_n, bp);
                continue;
            }
            const auto& pipe = pipes[coded];
            const auto& idx = idx_by_band[coded];
            ++coded;
            const int L = 1 << pipe.bits;
            for (size_t i = 0; i < plane_n; ++i) {
                int cell = idx[size_t(ch) * plane_n + i];
                double lo = pipe.mn + cell * pipe.width;
                double hi = cell == L - 1 ? pipe.mn + (cell + 1) * pipe.width + 1e-9
                                          : pipe.mn + (cell + 1) * pipe.width;
                bp[i] = float(std::clamp(double(sip[i]), lo, hi));
            }
        }
        Tensor plane = idct4(bands);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(ch, y, x) = std::clamp(plane.at(0, y, x), 0.f, 1.f);
    }
    return out;
}

std::vector<Tensor> per_channel_dct(const Tensor& rgb) {
    std::vector<Tensor> out;
    for (int ch = 0; ch < 3; ++ch) {
        Tensor plane(1, rgb.h, rgb.w);
        std::copy(rgb.plane(ch), rgb.plane(ch) + size_t(rgb.h) * rgb.w, plane.v.begin());
        out.push_back(dct4(plane));
    }
    return out;
}

struct WzFrameCode {
    std::vector<uint8_t> meta, payload;
    Tensor rec;
    double syndrome_bits = 0;
};

WzFrameCode code_wz_frame(const Tensor& wz, const Tensor& si, int quality) {
    const auto& qp = preset(quality);
    const auto& code = Ldpca::instance();
    auto wz_bands = per_channel_dct(wz);
    auto si_bands = per_channel_dct(si);

    WzFrameCode out;
    ByteWriter meta;
    ByteWriter payload;
    std::vector<BandPipe> pipes;
    std::vector<std::vector<int>> idx_by_band;

    for (int band = 0; band < 16; ++band) {
        if (qp[size_t(band)] == 0) continue;
        auto v = gather_band(wz_bands, band);
        auto s = gather_band(si_bands, band);

        BandPipe pipe;
        pipe.bits = qp[size_t(band)];
        pipe.count = v.size();
        double mn = v[0], mx = v[0], absres = 0;
        for (size_t i = 0; i < v.size(); ++i) {
            mn = std::min(mn, double(v[i]));
            mx = std::max(mx, double(v[i]));
            absres += std::fabs(double(v[i]) - s[i]);
        }
        if (mx - mn < 1e-9) mx = mn + 1e-6;
        // round the transmitted stats to f32 first so the decoder's
        // soft-input computation is bit-identical to the encoder's
        pipe.mn = double(float(mn));
        mx = double(float(mx));
        const int L = 1 << pipe.bits;
        pipe.width = (mx - pipe.mn) / L;
        pipe.alpha = double(
            float(std::clamp(1.0 / std::max(absres / double(v.size()), 1e-300), 1e-3, 1e4)));
        meta.f32(float(pipe.mn));
        meta.f32(float(mx));
        meta.f32(float(pipe.alpha));

        std::vector<int> idx(v.size());
        for (size_t i = 0; i < v.size(); ++i)
            idx[i] = std::clamp(int((v[i] - pipe.mn) / pipe.width), 0, L - 1);

        std::vector<int> hi_bits(v.size(), 0);
        for (size_t blk = 0; blk < pipe.blocks(); ++blk) {
            size_t off = blk * kLdpcaN;
            size_t len = std::min(size_t(kLdpcaN), v.size() - off);
            for (int b = pipe.bits - 1; b >= 0; --b) {
                std::vector<uint8_t> bits(kLdpcaN, 0);
                for (size_t i = 0; i < len; ++i)
                    bits[i] = uint8_t((idx[off + i] >> b) & 1);
                auto revealed = code.syndromes(bits);
                auto llr = plane_llrs(s, hi_bits, off, len, pipe.bits, b, pipe.mn, pipe.width,
                                      pipe.alpha);
                std::vector<uint8_t> decoded;
                int chunks = decode_with_feedback(code, llr, revealed, bits, decoded);
                if (chunks > kLdpcaChunks)
                    throw std::logic_error("ldpca: full reveal failed to decode");
                payload.u8(uint8_t(chunks));
                auto packed = pack_bits(revealed, size_t(chunks) * kLdpcaChunk);
                payload.b.insert(payload.b.end(), packed.begin(), packed.end());
                auto plane_bytes = pack_bits(bits, kLdpcaN);
                payload.u8(crc8(plane_bytes.data(), plane_bytes.size()));
                out.syndrome_bits += double(chunks) * kLdpcaChunk;
                for (size_t i = 0; i < len; ++i)
                    hi_bits[off + i] = (hi_bits[off + i] << 1) | ((idx[off + i] >> b) & 1);
            }
        }
        pipes.push_back(pipe);
        idx_by_band.push_back(std::move(idx));
    }
    out.meta = std::move(meta.b);
    out.payload = std::move(payload.b);
    out.rec = assemble(si_bands, qp, idx_by_band, pipes, wz.h, wz.w);
    return out;
}

Tensor decode_wz_frame(const std::vector<uint8_t>& meta_bytes,
                       const std::vector<uint8_t>& payload_bytes, const Tensor& si, int quality) {
    const auto& qp = preset(quality);
    const auto& code = Ldpca::instance();
    auto si_bands = per_channel_dct(si);
    ByteReader meta{meta_bytes};
    ByteReader payload{payload_bytes};

    std::vector<BandPipe> pipes;
    std::vector<std::vector<int>> idx_by_band;
    auto s_probe = gather_band(si_bands, 0);
    const size_t count = s_probe.size();

    for (int band = 0; band < 16; ++band) {
        if (qp[size_t(band)] == 0) continue;
        auto s = gather_band(si_bands, band);
        BandPipe pipe;
        pipe.bits = qp[size_t(band)];
        pipe.count = count;
        pipe.mn = meta.f32();
        double mx = meta.f32();
        pipe.alpha = meta.f32();
        const int L = 1 << pipe.bits;
        pipe.width = (mx - pipe.mn) / L;

        std::vector<int> idx(count, 0);
        std::vector<int> hi_bits(count, 0);
        for (size_t blk = 0; blk < pipe.blocks(); ++blk) {
            size_t off = blk * kLdpcaN;
            size_t len = std::min(size_t(kLdpcaN), count - off);
            for (int b = pipe.bits - 1; b >= 0; --b) {
                int chunks = payload.u8();
                size_t nbits = size_t(chunks) * kLdpcaChunk;
                size_t nbytes = (nbits + 7) / 8;
                if (payload.pos + nbytes > payload_bytes.size())
                    throw container::ContainerError("classic: truncated syndromes");
                std::vector<uint8_t> revealed(kLdpcaN, 0);
                for (size_t i = 0; i < nbits; ++i)
                    revealed[i] = (payload_bytes[payload.pos + i / 8] >> (i % 8)) & 1;
                payload.pos += nbytes;
                uint8_t want_crc = payload.u8();

                auto llr = plane_llrs(s, hi_bits, off, len, pipe.bits, b, pipe.mn, pipe.width,
                                      pipe.alpha);
                std::vector<uint8_t> decoded;
                if (!code.decode(llr, revealed, chunks, decoded))
                    throw container::ContainerError("classic: bit plane failed to decode");
                auto plane_bytes = pack_bits(decoded, kLdpcaN);
                if (crc8(plane_bytes.data(), plane_bytes.size()) != want_crc)
                    throw container::ContainerError("classic: bit plane checksum mismatch");
                for (size_t i = 0; i < len; ++i) {
                    hi_bits[off + i] = (hi_bits[off + i] << 1) | decoded[i];
                    idx[off + i] = (idx[off + i] << 1) | decoded[i];
                }
            }
        }
        // hi_bits accumulated every plane, so idx == hi_bits == final index
        pipes.push_back(pipe);
        idx_by_band.push_back(std::move(idx));
    }
    return assemble(si_bands, qp, idx_by_band, pipes, si.h, si.w);
}

Tensor blend(const Tensor& a, const Tensor& b, float t) {
    Tensor out(a.c, a.h, a.w);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = (1.f - t) * a.v[i] + t * b.v[i];
    return out;
}

Tensor quantize_key(const Tensor& px, std::vector<uint8_t>* bytes) {
    Tensor rec(px.c, px.h, px.w);
    for (size_t i = 0; i < px.size(); ++i) {
        int q = std::clamp(int(std::lround(px.v[i] * 255.f)), 0, 255);
        if (bytes) bytes->push_back(uint8_t(q));
        rec.v[i] = float(q) / 255.f;
    }
    return rec;
}

}  // namespace

container::Container classic_encode(const VideoSequence& seq, int gop_size, int quality,
                                    ClassicStats* stats) {
    if (seq.frames.empty()) throw ParamError("cannot encode an empty sequence");
    preset(quality);  // range check

    container::Container c;
    c.codec_id = container::kClassic;
    c.width = uint16_t(seq.width);
    c.height = uint16_t(seq.height);
    c.gop_size = uint8_t(gop_size);
    c.lambda_id = uint8_t(quality);
    c.frames.resize(seq.count());

    std::vector<bool> is_key(seq.count(), false);
    for (auto& gop : split_gops(seq, gop_size)) is_key[size_t(gop.key_index) - 1] = true;
    is_key.back() = true;

    std::vector<Tensor> rec(seq.count());
    std::vector<int> keys;
    ClassicStats local;
    for (size_t i = 0; i < seq.count(); ++i) {
        if (!is_key[i]) continue;
        keys.push_back(int(i));
        auto padded = pad_reflect(seq.frames[i].pixels, 4);
        container::FrameStream f;
        f.role = container::kKey;
        f.substreams.emplace_back();
        rec[i] = quantize_key(padded, &f.substreams[0]);
        c.frames[i] = std::move(f);
    }
    for (size_t k = 0; k + 1 < keys.size(); ++k) {
        for (auto& step : si::gop_schedule(keys[k], keys[k + 1])) {
            auto si_frame = blend(rec[size_t(step.ref0)], rec[size_t(step.ref1)], step.t);
            auto padded = pad_reflect(seq.frames[size_t(step.target)].pixels, 4);
            auto wzc = code_wz_frame(padded, si_frame, quality);
            container::FrameStream f;
            f.role = container::kWz;
            f.substreams.push_back(std::move(wzc.meta));
            f.substreams.push_back(std::move(wzc.payload));
            c.frames[size_t(step.target)] = std::move(f);
            rec[size_t(step.target)] = std::move(wzc.rec);
            local.wz_syndrome_bits += wzc.syndrome_bits;
            local.wz_frames += 1;
        }
    }
    if (stats) *stats = local;
    return c;
}

ClassicDecodeResult classic_decode(const container::Container& c) {
    if (c.codec_id != container::kClassic)
        throw container::ContainerError("container was not produced by the classic codec");
    const int quality = c.lambda_id;
    preset(quality);
    const int ph = (c.height + 3) / 4 * 4, pw = (c.width + 3) / 4 * 4;

    std::vector<Tensor> rec(c.frames.size()), si_store(c.frames.size());
    std::vector<int> keys;
    for (size_t i = 0; i < c.frames.size(); ++i) {
        if (c.frames[i].role != container::kKey) continue;
        keys.push_back(int(i));
        const auto& raw = c.frames[i].substreams.at(0);
        if (int(raw.size()) != 3 * ph * pw)
            throw container::ContainerError("classic: key frame payload size");
        Tensor t(3, ph, pw);
        for (size_t j = 0; j < raw.size(); ++j) t.v[j] = float(raw[j]) / 255.f;
        rec[i] = t;
        si_store[i] = std::move(t);
    }
    if (keys.empty() || keys.front() != 0 || keys.back() != int(c.frames.size()) - 1)
        throw container::ContainerError("stream must start and end with key frames");

    for (size_t k = 0; k + 1 < keys.size(); ++k) {
        for (auto& step : si::gop_schedule(keys[k], keys[k + 1])) {
            const auto& f = c.frames[size_t(step.target)];
            if (f.role != container::kWz || f.substreams.size() != 2)
                throw container::ContainerError("classic: malformed WZ frame");
            auto si_frame = blend(rec[size_t(step.ref0)], rec[size_t(step.ref1)], step.t);
            rec[size_t(step.target)] =
                decode_wz_frame(f.substreams[0], f.substreams[1], si_frame, quality);
            si_store[size_t(step.target)] = std::move(si_frame);
        }
    }

    ClassicDecodeResult out;
    out.video.width = out.side_info.width = c.width;
    out.video.height = out.side_info.height = c.height;
    for (size_t i = 0; i < rec.size(); ++i) {
        Frame f, s;
        f.index = s.index = int(i) + 1;
        f.pixels = crop(rec[i], c.height, c.width);
        s.pixels = crop(si_store[i], c.height, c.width);
        out.video.frames.push_back(std::move(f));
        out.side_info.frames.push_back(std::move(s));
    }
    return out;
}

}  // namespace ddvc::classic
