#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "ddvc/container.hpp"
#include "ddvc/video_io.hpp"

// Transform-domain Wyner-Ziv codec: 4x4 DCT bands, power-of-two dynamic
// range quantizers, bit-plane Slepian-Wolf coding with a rate-adaptive
// LDPC-accumulate code, and Laplacian-modeled side information at the
// decoder. The feedback channel is simulated at the encoder, which runs the
// deterministic decoder to find the minimal syndrome prefix per bit plane.
namespace ddvc::classic {

// ------------------------------------------------------------------ DCT

// (1,H,W) plane with H,W divisible by 4 -> (16, H/4, W/4) band tensor in
// zigzag-free row-major band order; orthonormal, so idct4(dct4(x)) == x.
Tensor dct4(const Tensor& plane);
Tensor idct4(const Tensor& bands);

// ------------------------------------------------------------ quantizers

// Bits per band (log2 of level count, 0 = band not coded), row-major over
// the 4x4 frequency grid. Presets 0..7 trade rate for quality.
using QualityPreset = std::array<int, 16>;
const QualityPreset& preset(int quality);
constexpr int kQualityCount = 8;

// --------------------------------------------------------------- LDPCA

constexpr int kLdpcaN = 1024;
constexpr int kLdpcaChunk = 16;  // syndrome bits revealed per rate step
constexpr int kLdpcaChunks = kLdpcaN / kLdpcaChunk;

class Ldpca {
  public:
    static const Ldpca& instance();

    // full accumulated syndrome sequence, in reveal (bit-reversed) order
    std::vector<uint8_t> syndromes(const std::vector<uint8_t>& bits) const;

    // Belief-propagation decode from the first `chunks` reveal-order
    // syndrome bits; llr[i] > 0 favors bit 0. At full reveal the system is
    // solved exactly. Returns true and fills `out` when all merged checks
    // are satisfied.
    bool decode(const std::vector<double>& llr, const std::vector<uint8_t>& revealed, int chunks,
                std::vector<uint8_t>& out) const;

  private:
    Ldpca();
    std::vector<std::array<int, 3>> rows_;                // H, 3 ones per row
    std::vector<std::array<uint64_t, kLdpcaN / 64>> inv_;  // H^-1 over GF(2)
    std::vector<int> reveal_order_;                        // bit-reversed indices
    friend struct LdpcaBuilder;
};

uint8_t crc8(const uint8_t* data, size_t n);

// ----------------------------------------------------- Slepian-Wolf trial

// One synthetic Slepian-Wolf exchange over a BSC(p): draws a random source
// block, flips bits with probability p to build the side information, then
// decodes with incrementally revealed syndromes. rate is revealed syndrome
// bits over block length; ok means the exact source block was recovered.
struct SwResult {
    double rate = 1.0;
    bool ok = false;
};
SwResult sw_rate_trial(double p, std::mt19937& rng);

// ----------------------------------------------------------- frame codec

struct ClassicStats {
    double wz_syndrome_bits = 0;  // revealed syndrome payload
    double wz_frames = 0;
};

// Keys are stored as raw 8-bit pixels; WZ frames as per-band quantizer
// metadata plus LDPCA syndrome prefixes for each bit plane. quality selects
// the preset (stored in the container's lambda_id field).
container::Container classic_encode(const VideoSequence& seq, int gop_size, int quality,
                                    ClassicStats* stats = nullptr);

struct ClassicDecodeResult {
    VideoSequence video;
    VideoSequence side_info;  // the blended SI, for gain measurements
};
ClassicDecodeResult classic_decode(const container::Container& c);

}  // namespace ddvc::classic
