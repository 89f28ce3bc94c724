#include "ddvc/rans.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace ddvc::rans {

namespace {
constexpr uint32_t kRansL = 1u << 23;

double norm_cdf(double u) { return 0.5 * std::erfc(-u / std::sqrt(2.0)); }
}  // namespace

CdfTable quantize_pmf(const std::vector<double>& pmf, int offset, bool has_escape) {
    size_t k = pmf.size() + (has_escape ? 1 : 0);
    std::vector<uint32_t> freq(k, 0);
    double total = 0;
    for (double p : pmf) total += p;
    if (has_escape) total += std::max(1e-9, 1.0 - total);
    uint32_t assigned = 0;
    for (size_t i = 0; i < pmf.size(); ++i) {
        freq[i] = uint32_t(std::max(1.0, std::round(pmf[i] / total * kProbScale)));
        assigned += freq[i];
    }
    if (has_escape) {
        freq[k - 1] = 1;
        assigned += 1;
    }
    // settle the budget on the largest entries
    while (assigned != kProbScale) {
        size_t imax = 0;
        for (size_t i = 1; i < k; ++i)
            if (freq[i] > freq[imax]) imax = i;
        if (assigned > kProbScale) {
            uint32_t cut = std::min(freq[imax] - 1, assigned - kProbScale);
            if (cut == 0) throw std::logic_error("cannot quantize pmf to 2^16");
            freq[imax] -= cut;
            assigned -= cut;
        } else {
            freq[imax] += kProbScale - assigned;
            assigned = kProbScale;
        }
    }
    CdfTable t;
    t.offset = offset;
    t.has_escape = has_escape;
    t.cum.resize(k + 1, 0);
    for (size_t i = 0; i < k; ++i) t.cum[i + 1] = t.cum[i] + freq[i];
    return t;
}

CdfTable build_gaussian_table(double sigma) {
    int qmax = 1;
    while (qmax < 255 && 2.0 * (1.0 - norm_cdf((qmax + 0.5) / sigma)) >= 1e-6) ++qmax;
    std::vector<double> pmf(2 * qmax + 1);
    for (int s = -qmax; s <= qmax; ++s)
        pmf[s + qmax] = norm_cdf((s + 0.5) / sigma) - norm_cdf((s - 0.5) / sigma);
    return quantize_pmf(pmf, qmax, /*has_escape=*/true);
}

const CdfTable& uniform_byte_table() {
    static const CdfTable t = [] {
        CdfTable u;
        u.offset = 0;
        u.has_escape = false;
        u.cum.resize(257);
        for (int i = 0; i <= 256; ++i) u.cum[i] = uint32_t(i) << 8;
        return u;
    }();
    return t;
}

std::vector<uint8_t> encode(const std::vector<int32_t>& values,
                            const std::vector<const CdfTable*>& contexts) {
    if (values.size() != contexts.size()) throw std::invalid_argument("rans: context count");
    // flatten escapes into a single (index, table) sequence
    std::vector<std::pair<uint32_t, const CdfTable*>> seq;
    seq.reserve(values.size());
    const CdfTable& bytes_tbl = uniform_byte_table();
    for (size_t i = 0; i < values.size(); ++i) {
        const CdfTable* t = contexts[i];
        int32_t v = values[i];
        if (t->in_alphabet(v)) {
            seq.emplace_back(uint32_t(v + t->offset), t);
        } else {
            if (!t->has_escape) throw std::logic_error("rans: value outside escape-free alphabet");
            seq.emplace_back(uint32_t(t->index_count() - 1), t);
            uint32_t raw = uint32_t(v);
            for (int b = 0; b < 4; ++b) seq.emplace_back((raw >> (8 * b)) & 0xFF, &bytes_tbl);
        }
    }
    std::vector<uint8_t> out;
    uint32_t x = kRansL;
    for (auto it = seq.rbegin(); it != seq.rend(); ++it) {
        const auto& [idx, t] = *it;
        uint32_t f = t->cum[idx + 1] - t->cum[idx];
        uint32_t c = t->cum[idx];
        uint32_t x_max = ((kRansL >> kProbBits) << 8) * f;
        while (x >= x_max) {
            out.push_back(uint8_t(x & 0xFF));
            x >>= 8;
        }
        x = ((x / f) << kProbBits) + (x % f) + c;
    }
    for (int b = 0; b < 4; ++b) {
        out.push_back(uint8_t(x & 0xFF));
        x >>= 8;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<int32_t> decode(const std::vector<uint8_t>& bytes,
                            const std::vector<const CdfTable*>& contexts) {
    if (bytes.size() < 4) throw std::runtime_error("rans: stream too short");
    size_t pos = 0;
    uint32_t x = 0;
    for (int b = 0; b < 4; ++b) x = (x << 8) | bytes[pos++];
    auto pull = [&](const CdfTable& t) -> uint32_t {
        uint32_t df = x & (kProbScale - 1);
        auto it = std::upper_bound(t.cum.begin(), t.cum.end(), df);
        uint32_t idx = uint32_t(it - t.cum.begin()) - 1;
        uint32_t f = t.cum[idx + 1] - t.cum[idx];
        x = f * (x >> kProbBits) + df - t.cum[idx];
        while (x < kRansL) {
            if (pos >= bytes.size()) throw std::runtime_error("rans: truncated stream");
            x = (x << 8) | bytes[pos++];
        }
        return idx;
    };
    const CdfTable& bytes_tbl = uniform_byte_table();
    std::vector<int32_t> out;
    out.reserve(contexts.size());
    for (const CdfTable* t : contexts) {
        uint32_t idx = pull(*t);
        if (t->has_escape && int(idx) == t->index_count() - 1) {
            uint32_t raw = 0;
            for (int b = 0; b < 4; ++b) raw |= pull(bytes_tbl) << (8 * b);
            out.push_back(int32_t(raw));
        } else {
            out.push_back(int32_t(idx) - t->offset);
        }
    }
    return out;
}

double table_bits(const std::vector<int32_t>& values,
                  const std::vector<const CdfTable*>& contexts) {
    double bits = 0;
    for (size_t i = 0; i < values.size(); ++i) {
        const CdfTable* t = contexts[i];
        int32_t v = values[i];
        uint32_t idx = t->in_alphabet(v) ? uint32_t(v + t->offset) : uint32_t(t->index_count() - 1);
        uint32_t f = t->cum[idx + 1] - t->cum[idx];
        bits -= std::log2(double(f) / kProbScale);
        if (!t->in_alphabet(v)) bits += 32.0;
    }
    return bits;
}

int scale_index(double sigma) {
    sigma = std::clamp(sigma, kSigmaMin, kSigmaMax);
    double step = std::log(kSigmaMax / kSigmaMin) / (kScaleLevels - 1);
    int i = int(std::lround(std::log(sigma / kSigmaMin) / step));
    return std::clamp(i, 0, kScaleLevels - 1);
}

double scale_value(int index) {
    double step = std::log(kSigmaMax / kSigmaMin) / (kScaleLevels - 1);
    return kSigmaMin * std::exp(step * index);
}

const CdfTable& scale_table(int index) {
    static std::array<CdfTable, kScaleLevels> cache;
    static std::array<std::once_flag, kScaleLevels> flags;
    std::call_once(flags[size_t(index)],
                   [index] { cache[size_t(index)] = build_gaussian_table(scale_value(index)); });
    return cache[size_t(index)];
}

}  // namespace ddvc::rans
