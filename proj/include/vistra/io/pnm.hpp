#pragma once

#include <fstream>

#include "vistra/io/checkpoint.hpp"
#include "vistra/tensor.hpp"

namespace vistra {

// Binary PGM (P5) / PPM (P6) writers and readers. All visualization output
// uses these formats so tests can compare files byte for byte.

inline void write_pgm(const std::string& path, int64_t width, int64_t height,
                      const std::vector<uint8_t>& gray) {
    if (int64_t(gray.size()) != width * height) throw IoError("write_pgm: size mismatch");
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(gray.data()), gray.size());
    write_file_atomic(path, out);
}

inline void write_ppm(const std::string& path, int64_t width, int64_t height,
                      const std::vector<uint8_t>& rgb) {
    if (int64_t(rgb.size()) != width * height * 3) throw IoError("write_ppm: size mismatch");
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
    write_file_atomic(path, out);
}

// Min-max normalization of a scalar map into 8-bit gray. A constant map
// normalizes to mid-gray.
template <typename T>
std::vector<uint8_t> normalize_to_bytes(const std::vector<T>& values) {
    T lo = values.empty() ? T(0) : values[0];
    T hi = lo;
    for (T v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<uint8_t> out(values.size());
    if (hi <= lo) {
        std::fill(out.begin(), out.end(), uint8_t(128));
        return out;
    }
    const double span = double(hi) - double(lo);
    for (size_t i = 0; i < values.size(); ++i)
        out[i] = uint8_t(std::lround(255.0 * (double(values[i]) - double(lo)) / span));
    return out;
}

struct PnmImage {
    int64_t width = 0, height = 0, channels = 0;
    std::vector<uint8_t> bytes;  // row-major, interleaved channels
};

inline PnmImage read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6") throw IoError("unsupported PNM magic '" + magic + "' in " + path);
    auto next_token = [&]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw IoError("truncated PNM header: " + path);
    };
    PnmImage img;
    img.width = std::stoll(next_token());
    img.height = std::stoll(next_token());
    const int64_t maxval = std::stoll(next_token());
    if (maxval != 255) throw IoError("only 8-bit PNM supported: " + path);
    in.get();  // single whitespace after maxval
    img.channels = magic == "P5" ? 1 : 3;
    img.bytes.resize(size_t(img.width * img.height * img.channels));
    in.read(reinterpret_cast<char*>(img.bytes.data()), std::streamsize(img.bytes.size()));
    if (!in) throw IoError("truncated PNM payload: " + path);
    return img;
}

// [H, W, 3] float image in [0, 1] -> PPM bytes.
template <typename T>
std::vector<uint8_t> image_to_bytes(const Tensor<T>& img) {
    if (img.rank() != 3 || img.shape[2] != 3) fail_shape("image_to_bytes: expected [H, W, 3]");
    std::vector<uint8_t> out(size_t(img.numel()));
    for (int64_t i = 0; i < img.numel(); ++i) {
        double v = std::clamp(double((*img.data)[size_t(i)]), 0.0, 1.0);
        out[size_t(i)] = uint8_t(std::lround(v * 255.0));
    }
    return out;
}

}  // namespace vistra
