#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddvc/tensor.hpp"

namespace ddvc {

// Raised for malformed inputs (truncated YUV, mixed-resolution PNGs, ...).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParamError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// RGB frame with values in [0,1], CHW layout. `index` is 1-based display order.
struct Frame {
    Tensor pixels;  // 3 x H x W
    int index = 0;
    int width() const { return pixels.w; }
    int height() const { return pixels.h; }
};

struct VideoSequence {
    std::vector<Frame> frames;
    int width = 0, height = 0;
    size_t count() const { return frames.size(); }
};

struct GOPView {
    int key_index = 0;                 // 1-based
    std::vector<int> wz_indices;       // strictly between keys
    std::optional<int> next_key_index;
};

struct YuvPlanes {
    int width = 0, height = 0;           // luma dims; chroma is half in both axes
    std::vector<float> y, u, v;          // values in [0,1]
};

enum class InputFormat { yuv420p, png_dir };

VideoSequence read_sequence(const std::string& path, InputFormat format, int width, int height,
                            int max_frames);
void write_sequence_png(const VideoSequence& seq, const std::string& dir);

// BT.601 full-range conversion. Chroma upsampling is 2x2 replication and
// downsampling is the matching 2x2 average, so the pair round-trips.
Frame yuv420_to_rgb(const YuvPlanes& p);
YuvPlanes rgb_to_yuv420(const Frame& f);

std::vector<GOPView> split_gops(const VideoSequence& seq, int gop_size);

// Reflect-pad to the next multiple of `mult` (bottom/right); crop undoes it.
Tensor pad_reflect(const Tensor& t, int mult);
Tensor crop(const Tensor& t, int height, int width);

}  // namespace ddvc
