// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "voxforge/common.hpp"

namespace voxforge {

/// Row-major, channel-interleaved 2D raster.
template <typename T>
struct Raster {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t channels = 1;
    std::vector<T> data;

    Raster() = default;
    Raster(std::uint32_t w, std::uint32_t h, std::uint32_t c = 1, T fill = T{})
        : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    bool empty() const { return data.empty(); }

    T& at(std::uint32_t x, std::uint32_t y, std::uint32_t c = 0) {
        return data[(std::size_t(y) * width + x) * channels + c];
    }
    const T& at(std::uint32_t x, std::uint32_t y, std::uint32_t c = 0) const {
        return data[(std::size_t(y) * width + x) * channels + c];
    }

    bool contains(long x, long y) const {
        return x >= 0 && y >= 0 && x < long(width) && y < long(height);
    }

    bool same_shape(std::uint32_t w, std::uint32_t h) const { return width == w && height == h; }

    friend bool operator==(const Raster&, const Raster&) = default;
};

using FloatRaster = Raster<float>;
using MaskRaster = Raster<std::uint8_t>;

/// Bilinear lookup on channel c with pixel centres at integer coordinates.
/// Returns false when any of the four taps falls outside the raster.
bool sample_bilinear(const FloatRaster& r, double x, double y, std::uint32_t c, double& out);
/// Bilinear depth lookup that refuses to blend with taps whose depth is not
/// positive and finite.
bool sample_depth_bilinear(const FloatRaster& r, double x, double y, double& out);

/// `IMGF` container: magic, w/h/channels as uint32, float32 payload.
void write_imgf(const std::string& path, const FloatRaster& r);
FloatRaster read_imgf(const std::string& path);

/// `IMGB` container for byte masks, same header layout as IMGF.
void write_imgb(const std::string& path, const MaskRaster& r);
MaskRaster read_imgb(const std::string& path);

/// 8-bit binary PPM (P6) for quick viewing; values clamped to [0,1].
/// Single-channel rasters are written as grey.
void write_ppm(const std::string& path, const FloatRaster& r, float scale = 1.0f);

}  // namespace voxforge
