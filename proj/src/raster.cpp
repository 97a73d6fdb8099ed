// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "voxforge/binary_io.hpp"

namespace voxforge {

bool sample_bilinear(const FloatRaster& r, double x, double y, std::uint32_t c, double& out) {
    if (!(x >= 0.0) || !(y >= 0.0)) return false;
    const double maxx = double(r.width) - 1.0, maxy = double(r.height) - 1.0;
    if (x > maxx || y > maxy) return false;
    auto x0 = static_cast<std::uint32_t>(x);
    auto y0 = static_cast<std::uint32_t>(y);
    std::uint32_t x1 = std::min(x0 + 1, r.width - 1);
    std::uint32_t y1 = std::min(y0 + 1, r.height - 1);
    const double fx = x - x0, fy = y - y0;
    const double top = (1.0 - fx) * r.at(x0, y0, c) + fx * r.at(x1, y0, c);
    const double bot = (1.0 - fx) * r.at(x0, y1, c) + fx * r.at(x1, y1, c);
    out = (1.0 - fy) * top + fy * bot;
    return true;
}

bool sample_depth_bilinear(const FloatRaster& r, double x, double y, double& out) {
    if (!sample_bilinear(r, x, y, 0, out)) return false;
    const auto x0 = static_cast<std::uint32_t>(x), y0 = static_cast<std::uint32_t>(y);
    const std::uint32_t x1 = std::min(x0 + 1, r.width - 1), y1 = std::min(y0 + 1, r.height - 1);
    auto ok = [](double d) { return d > 0.0 && std::isfinite(d); };
    return ok(r.at(x0, y0)) && ok(r.at(x1, y0)) && ok(r.at(x0, y1)) && ok(r.at(x1, y1));
}

namespace {

template <typename T>
void write_container(const std::string& path, const Raster<T>& r, const char (&magic)[5]) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail_data("cannot open " + path + " for writing");
    binio::put_magic(os, magic);
    binio::put<std::uint32_t>(os, r.width);
    binio::put<std::uint32_t>(os, r.height);
    binio::put<std::uint32_t>(os, r.channels);
    for (T v : r.data) binio::put<T>(os, v);
    if (!os) fail_data("write failed: " + path);
}

template <typename T>
Raster<T> read_container(const std::string& path, const char (&magic)[5]) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail_data("cannot open " + path);
    binio::expect_magic(is, magic, path);
    const auto w = binio::get<std::uint32_t>(is, "raster width");
    const auto h = binio::get<std::uint32_t>(is, "raster height");
    const auto c = binio::get<std::uint32_t>(is, "raster channels");
    if (c == 0 || c > 16 || std::uint64_t(w) * h > (1ull << 28))
        fail_data("malformed raster header in " + path);
    Raster<T> r;
    r.width = w;
    r.height = h;
    r.channels = c;
    r.data.resize(std::size_t(w) * h * c);
    for (auto& v : r.data) v = binio::get<T>(is, "raster payload");
    if (is.peek() != std::char_traits<char>::eof()) fail_data("trailing bytes in " + path);
    return r;
}

}  // namespace

void write_imgf(const std::string& path, const FloatRaster& r) { write_container(path, r, "IMGF"); }
FloatRaster read_imgf(const std::string& path) { return read_container<float>(path, "IMGF"); }
void write_imgb(const std::string& path, const MaskRaster& r) { write_container(path, r, "IMGB"); }
MaskRaster read_imgb(const std::string& path) { return read_container<std::uint8_t>(path, "IMGB"); }

void write_ppm(const std::string& path, const FloatRaster& r, float scale) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail_data("cannot open " + path + " for writing");
    os << "P6\n" << r.width << " " << r.height << "\n255\n";
    for (std::uint32_t y = 0; y < r.height; ++y) {
        for (std::uint32_t x = 0; x < r.width; ++x) {
            for (std::uint32_t c = 0; c < 3; ++c) {
                float v = r.at(x, y, std::min(c, r.channels - 1)) * scale;
                if (!std::isfinite(v)) v = 0.0f;
                v = std::clamp(v, 0.0f, 1.0f);
                os.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
            }
        }
    }
}

}  // namespace voxforge
