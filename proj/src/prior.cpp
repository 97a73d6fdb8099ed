// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/prior.hpp"

#include <cmath>
#include <filesystem>

namespace voxforge {

void DepthPrior::validate() const {
    if (depth.channels != 1 || confidence.channels != 1)
        fail_data("depth and confidence rasters must be single-channel");
    if (depth.width != confidence.width || depth.height != confidence.height)
        fail_data("depth/confidence dimension mismatch");
    if (depth.width != camera.width || depth.height != camera.height)
        fail_data("depth raster does not match the camera size");
    for (float k : confidence.data)
        if (!(k >= 0.0f && k <= 1.0f)) fail_data("confidence outside [0, 1]");
}

DepthPrior DepthPrior::aligned(const SimilarityTransform& T) const {
    DepthPrior out = *this;
    out.camera = T.apply(camera);
    for (float& d : out.depth.data) d = static_cast<float>(d * T.s);
    return out;
}

void save_prior(const std::string& stem, const DepthPrior& prior) {
    write_imgf(stem + ".depth.imgf", prior.depth);
    write_imgf(stem + ".conf.imgf", prior.confidence);
}

DepthPrior load_prior(const std::string& stem, const Camera& camera) {
    DepthPrior p;
    p.camera = camera;
    p.depth = read_imgf(stem + ".depth.imgf");
    const std::string conf = stem + ".conf.imgf";
    if (std::filesystem::exists(conf)) {
        p.confidence = read_imgf(conf);
    } else {
        p.confidence = FloatRaster(p.depth.width, p.depth.height, 1, 1.0f);
        p.confidence_missing = true;
    }
    p.validate();
    return p;
}

}  // namespace voxforge
