#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ddvc::cfg {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Merged view of defaults, an optional flat key-value config file, and CLI
// overrides (precedence CLI > file > defaults). Every field has a default;
// the effective config can be serialized back verbatim with to_text().
struct RunConfig {
    std::string codec = "deep";    // deep | classic
    std::string model = "toy";     // toy | full (deep network sizes)
    std::string metric = "mse";    // mse | msssim
    int lambda_id = 4;             // deep lambda grid index, 0..4
    int quality = 4;               // classic quality preset, 0..7
    int gop = 8;
    uint32_t seed = 7;
    int threads = 0;               // 0 = library default; DDVC_THREADS caps
    std::string format = "png";    // png | yuv
    int width = 0, height = 0;     // required for yuv input
    int max_frames = 0;            // 0 = all
    int stage = 1;                 // training stage
    int epochs = 0;                // 0 = stage default
    int batch = 8;
    int crop = 64;
    int triplets = 64;
    std::string motion = "translate";
    bool zero_si = false;          // train the SI-ablated model
    int frames = 9;                // make-data clip length
    int size = 64;                 // make-data frame size
    std::string input, output, ckpt, ckpt_init, ref, rec, bits;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Grammar: one `key = value` per line, `#` starts a comment, blank lines
// ignored. Unknown keys and unparseable values raise ConfigError; unknown
// keys name the nearest valid key.
RunConfig load_config(const std::string& path, const Overrides& overrides);
RunConfig parse_config_text(const std::string& text, const Overrides& overrides);

std::string to_text(const RunConfig& c);
std::vector<std::string> known_keys();

// --threads if set, else the OpenMP default, capped by env DDVC_THREADS.
int effective_threads(const RunConfig& c);

}  // namespace ddvc::cfg
