#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Byte-exact bitstream container:
//   magic "DDVC" | version u8 | codec_id u8 | width u16 | height u16 |
//   gop_size u8 | frame_count u32 | lambda_id u8 | table_version u8
// then per frame:
//   role u8 | substream_count u8 | lengths u32[count] | payloads |
//   crc32 u32 over this frame's payload bytes
// All integers little-endian.
namespace ddvc::container {

enum CodecId : uint8_t { kDeep = 0, kClassic = 1 };
enum FrameRole : uint8_t { kKey = 0, kWz = 1 };

struct FrameStream {
    uint8_t role = kKey;
    std::vector<std::vector<uint8_t>> substreams;
    size_t payload_bytes() const {
        size_t n = 0;
        for (auto& s : substreams) n += s.size();
        return n;
    }
};

struct Container {
    uint8_t version = 1;
    uint8_t codec_id = kDeep;
    uint16_t width = 0, height = 0;
    uint8_t gop_size = 8;
    uint8_t lambda_id = 0;
    uint8_t table_version = 1;
    std::vector<FrameStream> frames;

    size_t payload_bytes() const {
        size_t n = 0;
        for (auto& f : frames) n += f.payload_bytes();
        return n;
    }
    double bpp() const {
        return frames.empty() ? 0.0
                              : double(payload_bytes()) * 8.0 /
                                    (double(width) * height * frames.size());
    }
};

struct ContainerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

uint32_t crc32(const uint8_t* data, size_t n, uint32_t seed = 0);

std::vector<uint8_t> pack(const Container& c);
Container parse(const std::vector<uint8_t>& bytes);

void write_file(const Container& c, const std::string& path);
Container read_file(const std::string& path);

}  // namespace ddvc::container
