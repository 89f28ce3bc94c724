#pragma once

#include <cstdint>
#include <vector>

// Byte-wise rANS with 32-bit state and 16-bit frequency precision.
// Symbols outside a table's alphabet are coded through a reserved escape
// index followed by the raw 32-bit value as four uniform byte symbols.
namespace ddvc::rans {

constexpr int kProbBits = 16;
constexpr uint32_t kProbScale = 1u << kProbBits;

struct CdfTable {
    std::vector<uint32_t> cum;  // size K+1; cum[0]=0, cum[K]=kProbScale, strictly increasing
    int offset = 0;             // symbol value v maps to index v + offset
    bool has_escape = false;    // last index reserved for out-of-alphabet values

    int index_count() const { return int(cum.size()) - 1; }
    int value_count() const { return index_count() - (has_escape ? 1 : 0); }
    bool in_alphabet(int v) const {
        int i = v + offset;
        return i >= 0 && i < value_count();
    }
};

// Quantizes a pmf to integer frequencies totalling 2^16 with every entry >= 1.
CdfTable quantize_pmf(const std::vector<double>& pmf, int offset, bool has_escape);

// Gaussian alphabet [-q_max, q_max] with q_max chosen so the tail mass
// beyond it is < 1e-6 at this sigma (capped at 255); plus an escape symbol.
CdfTable build_gaussian_table(double sigma);

const CdfTable& uniform_byte_table();

// contexts[i] selects the table for symbol i; tables must outlive the call.
std::vector<uint8_t> encode(const std::vector<int32_t>& values,
                            const std::vector<const CdfTable*>& contexts);
std::vector<int32_t> decode(const std::vector<uint8_t>& bytes,
                            const std::vector<const CdfTable*>& contexts);

// Exact cost in bits of the quantized table (sum over values of
// -log2(freq/2^16)), escapes costed as escape symbol + 32 raw bits.
double table_bits(const std::vector<int32_t>& values,
                  const std::vector<const CdfTable*>& contexts);

// 64 log-spaced sigma levels over [0.11, 256]; returns the nearest level
// index in log space. Tables per level are cached process-wide.
constexpr int kScaleLevels = 64;
constexpr double kSigmaMin = 0.11, kSigmaMax = 256.0;
int scale_index(double sigma);
double scale_value(int index);
const CdfTable& scale_table(int index);
constexpr uint8_t kScaleTableVersion = 1;

}  // namespace ddvc::rans
