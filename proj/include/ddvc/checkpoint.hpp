#pragma once

#include <stdexcept>
#include <string>

#include "ddvc/nn.hpp"

// Versioned binary model checkpoint:
//   magic "DDVCCKP1" | config_len u32 | config JSON (UTF-8) |
//   tensor_count u32 | per tensor: name_len u16, name, c/h/w i32, floats LE
namespace ddvc::ckpt {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void save(const std::string& path, const nn::ParamStore& ps, const std::string& config_json);

// Returns the stored config JSON and loads every stored tensor into ps
// (shapes must match any parameter that already exists).
std::string load(const std::string& path, nn::ParamStore& ps);

// Reads only the config JSON without touching any parameters.
std::string peek_config(const std::string& path);

}  // namespace ddvc::ckpt
