#include "ddvc/container.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace ddvc::container {

uint32_t crc32(const uint8_t* data, size_t n, uint32_t seed) {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

namespace {
void put_u16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(uint8_t(v));
    b.push_back(uint8_t(v >> 8));
}
void put_u32(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(uint8_t(v >> (8 * i)));
}

struct Reader {
    const std::vector<uint8_t>& b;
    size_t pos = 0;
    uint8_t u8() {
        need(1);
        return b[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = uint16_t(b[pos] | (b[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(b[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    void need(size_t n) {
        if (pos + n > b.size()) throw ContainerError("truncated container");
    }
};
}  // namespace

std::vector<uint8_t> pack(const Container& c) {
    std::vector<uint8_t> out;
    out.insert(out.end(), {'D', 'D', 'V', 'C'});
    out.push_back(c.version);
    out.push_back(c.codec_id);
    put_u16(out, c.width);
    put_u16(out, c.height);
    out.push_back(c.gop_size);
    put_u32(out, uint32_t(c.frames.size()));
    out.push_back(c.lambda_id);
    out.push_back(c.table_version);
    for (auto& f : c.frames) {
        out.push_back(f.role);
        out.push_back(uint8_t(f.substreams.size()));
        for (auto& s : f.substreams) put_u32(out, uint32_t(s.size()));
        uint32_t crc = 0;
        for (auto& s : f.substreams) {
            out.insert(out.end(), s.begin(), s.end());
            crc = crc32(s.data(), s.size(), crc);
        }
        put_u32(out, crc);
    }
    return out;
}

Container parse(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    r.need(4);
    if (std::memcmp(bytes.data(), "DDVC", 4) != 0) throw ContainerError("bad magic");
    r.pos = 4;
    Container c;
    c.version = r.u8();
    if (c.version != 1) throw ContainerError("unsupported container version");
    c.codec_id = r.u8();
    c.width = r.u16();
    c.height = r.u16();
    c.gop_size = r.u8();
    uint32_t n = r.u32();
    c.lambda_id = r.u8();
    c.table_version = r.u8();
    for (uint32_t i = 0; i < n; ++i) {
        FrameStream f;
        f.role = r.u8();
        uint8_t cnt = r.u8();
        std::vector<uint32_t> lens(cnt);
        for (auto& l : lens) l = r.u32();
        uint32_t crc = 0;
        for (uint32_t l : lens) {
            r.need(l);
            f.substreams.emplace_back(bytes.begin() + long(r.pos), bytes.begin() + long(r.pos + l));
            crc = crc32(&bytes[r.pos], l, crc);
            r.pos += l;
        }
        uint32_t want = r.u32();
        if (crc != want)
            throw ContainerError("payload checksum mismatch in frame " + std::to_string(i));
        c.frames.push_back(std::move(f));
    }
    if (r.pos != bytes.size()) throw ContainerError("trailing bytes after last frame");
    return c;
}

void write_file(const Container& c, const std::string& path) {
    auto bytes = pack(c);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ContainerError("cannot write " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

Container read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContainerError("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return parse(bytes);
}

}  // namespace ddvc::container
