#include "ddvc/video_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ddvc/png_io.hpp"

namespace fs = std::filesystem;

namespace ddvc {

static VideoSequence read_yuv420(const std::string& path, int w, int h, int max_frames) {
    if (w <= 0 || h <= 0) throw ParamError("yuv420p input requires positive width/height");
    if (w % 2 || h % 2) throw ParamError("yuv420p dimensions must be even");
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    f.seekg(0, std::ios::end);
    const size_t file_size = size_t(f.tellg());
    f.seekg(0);
    const size_t frame_bytes = size_t(w) * h * 3 / 2;
    if (file_size % frame_bytes != 0)
        throw FormatError("truncated yuv420p file: " + path + " (size " +
                          std::to_string(file_size) + " not a multiple of " +
                          std::to_string(frame_bytes) + ")");
    size_t n = std::min<size_t>(file_size / frame_bytes, size_t(std::max(0, max_frames)));
    if (max_frames <= 0) n = file_size / frame_bytes;
    VideoSequence seq;
    seq.width = w;
    seq.height = h;
    std::vector<uint8_t> buf(frame_bytes);
    for (size_t i = 0; i < n; ++i) {
        f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(frame_bytes));
        YuvPlanes p;
        p.width = w;
        p.height = h;
        p.y.resize(size_t(w) * h);
        p.u.resize(size_t(w / 2) * (h / 2));
        p.v.resize(size_t(w / 2) * (h / 2));
        for (size_t k = 0; k < p.y.size(); ++k) p.y[k] = buf[k] / 255.f;
        for (size_t k = 0; k < p.u.size(); ++k) p.u[k] = buf[p.y.size() + k] / 255.f;
        for (size_t k = 0; k < p.v.size(); ++k) p.v[k] = buf[p.y.size() + p.u.size() + k] / 255.f;
        Frame fr = yuv420_to_rgb(p);
        fr.index = int(i) + 1;
        seq.frames.push_back(std::move(fr));
    }
    return seq;
}

static VideoSequence read_png_dir(const std::string& path, int max_frames) {
    std::vector<fs::path> files;
    if (!fs::is_directory(path)) throw FormatError("not a directory: " + path);
    for (auto& e : fs::directory_iterator(path))
        if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw FormatError("no frames in " + path);
    if (max_frames > 0 && int(files.size()) > max_frames) files.resize(size_t(max_frames));
    VideoSequence seq;
    for (size_t i = 0; i < files.size(); ++i) {
        png::Image img = png::read(files[i].string());
        if (i == 0) {
            seq.width = img.width;
            seq.height = img.height;
        } else if (img.width != seq.width || img.height != seq.height) {
            throw FormatError("mixed-resolution PNGs in " + path);
        }
        Frame fr;
        fr.index = int(i) + 1;
        fr.pixels = Tensor(3, img.height, img.width);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < 3; ++c) {
                    uint8_t px = img.channels == 1
                                     ? img.pixels[size_t(y) * img.width + x]
                                     : img.pixels[(size_t(y) * img.width + x) * 3 + c];
                    fr.pixels.at(c, y, x) = px / 255.f;
                }
        seq.frames.push_back(std::move(fr));
    }
    return seq;
}

VideoSequence read_sequence(const std::string& path, InputFormat format, int width, int height,
                            int max_frames) {
    return format == InputFormat::yuv420p ? read_yuv420(path, width, height, max_frames)
                                          : read_png_dir(path, max_frames);
}

void write_sequence_png(const VideoSequence& seq, const std::string& dir) {
    fs::create_directories(dir);
    for (auto& fr : seq.frames) {
        png::Image img;
        img.width = fr.width();
        img.height = fr.height();
        img.channels = 3;
        img.pixels.resize(size_t(img.width) * img.height * 3);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < 3; ++c)
                    img.pixels[(size_t(y) * img.width + x) * 3 + c] = uint8_t(
                        std::lround(std::clamp(fr.pixels.at(c, y, x), 0.f, 1.f) * 255.f));
        char name[32];
        std::snprintf(name, sizeof name, "%06d.png", fr.index);
        png::write((fs::path(dir) / name).string(), img);
    }
}

Frame yuv420_to_rgb(const YuvPlanes& p) {
    const int w = p.width, h = p.height;
    if (int(p.u.size()) != (w / 2) * (h / 2) || int(p.v.size()) != (w / 2) * (h / 2))
        throw ParamError("chroma planes must be half resolution in both axes");
    Frame fr;
    fr.pixels = Tensor(3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float Y = p.y[size_t(y) * w + x];
            float U = p.u[size_t(y / 2) * (w / 2) + x / 2] - 0.5f;  // replicated upsample
            float V = p.v[size_t(y / 2) * (w / 2) + x / 2] - 0.5f;
            fr.pixels.at(0, y, x) = std::clamp(Y + 1.402f * V, 0.f, 1.f);
            fr.pixels.at(1, y, x) = std::clamp(Y - 0.344136f * U - 0.714136f * V, 0.f, 1.f);
            fr.pixels.at(2, y, x) = std::clamp(Y + 1.772f * U, 0.f, 1.f);
        }
    return fr;
}

YuvPlanes rgb_to_yuv420(const Frame& f) {
    const int w = f.width(), h = f.height();
    YuvPlanes p;
    p.width = w;
    p.height = h;
    p.y.resize(size_t(w) * h);
    std::vector<float> uf(size_t(w) * h), vf(size_t(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float R = f.pixels.at(0, y, x), G = f.pixels.at(1, y, x), B = f.pixels.at(2, y, x);
            p.y[size_t(y) * w + x] = 0.299f * R + 0.587f * G + 0.114f * B;
            uf[size_t(y) * w + x] = -0.168736f * R - 0.331264f * G + 0.5f * B + 0.5f;
            vf[size_t(y) * w + x] = 0.5f * R - 0.418688f * G - 0.081312f * B + 0.5f;
        }
    p.u.resize(size_t(w / 2) * (h / 2));
    p.v.resize(size_t(w / 2) * (h / 2));
    for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x) {
            float ua = 0, va = 0;
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    ua += uf[size_t(2 * y + dy) * w + 2 * x + dx];
                    va += vf[size_t(2 * y + dy) * w + 2 * x + dx];
                }
            p.u[size_t(y) * (w / 2) + x] = ua / 4.f;
            p.v[size_t(y) * (w / 2) + x] = va / 4.f;
        }
    return p;
}

std::vector<GOPView> split_gops(const VideoSequence& seq, int gop_size) {
    if (gop_size < 2) throw ParamError("GOP size must be >= 2");
    const int n = int(seq.count());
    std::vector<GOPView> gops;
    for (int key = 1; key <= n; key += gop_size) {
        GOPView g;
        g.key_index = key;
        int next = key + gop_size;
        if (next <= n) {
            g.next_key_index = next;
            for (int i = key + 1; i < next; ++i) g.wz_indices.push_back(i);
        } else if (key < n) {
            // tail GOP: force the final frame to key role so every WZ frame
            // keeps two decoded references
            g.next_key_index = n;
            for (int i = key + 1; i < n; ++i) g.wz_indices.push_back(i);
            gops.push_back(g);
            GOPView last;
            last.key_index = n;
            gops.push_back(last);
            return gops;
        }
        gops.push_back(g);
    }
    return gops;
}

Tensor pad_reflect(const Tensor& t, int mult) {
    int ph = (t.h + mult - 1) / mult * mult;
    int pw = (t.w + mult - 1) / mult * mult;
    if (ph == t.h && pw == t.w) return t;
    Tensor out(t.c, ph, pw);
    for (int c = 0; c < t.c; ++c)
        for (int y = 0; y < ph; ++y) {
            int sy = y < t.h ? y : 2 * t.h - 2 - y;
            sy = std::clamp(sy, 0, t.h - 1);
            for (int x = 0; x < pw; ++x) {
                int sx = x < t.w ? x : 2 * t.w - 2 - x;
                sx = std::clamp(sx, 0, t.w - 1);
                out.at(c, y, x) = t.at(c, sy, sx);
            }
        }
    return out;
}

Tensor crop(const Tensor& t, int height, int width) {
    if (height == t.h && width == t.w) return t;
    Tensor out(t.c, height, width);
    for (int c = 0; c < t.c; ++c)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) out.at(c, y, x) = t.at(c, y, x);
    return out;
}

}  // namespace ddvc
