#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ddvc::png {

struct Image {
    int width = 0, height = 0, channels = 0;  // channels: 1 (gray) or 3 (rgb)
    std::vector<uint8_t> pixels;              // row-major, interleaved
};

Image read(const std::string& path);
void write(const std::string& path, const Image& img);

}  // namespace ddvc::png
