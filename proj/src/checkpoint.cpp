#include "ddvc/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace ddvc::ckpt {

namespace {
constexpr char kMagic[8] = {'D', 'D', 'V', 'C', 'C', 'K', 'P', '1'};

void put_u32(std::ostream& os, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = char(v >> (8 * i));
    os.write(b, 4);
}
void put_u16(std::ostream& os, uint16_t v) {
    char b[2] = {char(v), char(v >> 8)};
    os.write(b, 2);
}
uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw CheckpointError("truncated checkpoint");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}
uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    if (!is) throw CheckpointError("truncated checkpoint");
    return uint16_t(b[0] | (b[1] << 8));
}

std::ifstream open_checked(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw CheckpointError("not a model checkpoint: " + path);
    return f;
}
}  // namespace

void save(const std::string& path, const nn::ParamStore& ps, const std::string& config_json) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot write " + path);
    f.write(kMagic, 8);
    put_u32(f, uint32_t(config_json.size()));
    f.write(config_json.data(), std::streamsize(config_json.size()));
    put_u32(f, uint32_t(ps.all().size()));
    for (auto& [name, var] : ps.all()) {
        put_u16(f, uint16_t(name.size()));
        f.write(name.data(), std::streamsize(name.size()));
        put_u32(f, uint32_t(var->val.c));
        put_u32(f, uint32_t(var->val.h));
        put_u32(f, uint32_t(var->val.w));
        f.write(reinterpret_cast<const char*>(var->val.v.data()),
                std::streamsize(var->val.size() * sizeof(float)));
    }
    if (!f) throw CheckpointError("write failure on " + path);
}

std::string peek_config(const std::string& path) {
    auto f = open_checked(path);
    uint32_t n = get_u32(f);
    std::string cfg(n, '\0');
    f.read(cfg.data(), std::streamsize(n));
    if (!f) throw CheckpointError("truncated checkpoint");
    return cfg;
}

std::string load(const std::string& path, nn::ParamStore& ps) {
    auto f = open_checked(path);
    uint32_t n = get_u32(f);
    std::string cfg(n, '\0');
    f.read(cfg.data(), std::streamsize(n));
    if (!f) throw CheckpointError("truncated checkpoint");
    uint32_t count = get_u32(f);
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t len = get_u16(f);
        std::string name(len, '\0');
        f.read(name.data(), len);
        int c = int(get_u32(f)), h = int(get_u32(f)), w = int(get_u32(f));
        Tensor t(c, h, w);
        f.read(reinterpret_cast<char*>(t.v.data()), std::streamsize(t.size() * sizeof(float)));
        if (!f) throw CheckpointError("truncated checkpoint");
        ps.set_tensor(name, std::move(t));
    }
    return cfg;
}

}  // namespace ddvc::ckpt
