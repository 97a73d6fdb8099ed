// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "voxforge/camera.hpp"
#include "voxforge/raster.hpp"

namespace voxforge {

/// Per-view pseudo geometry: depth, confidence and the camera that
/// produced them.
struct DepthPrior {
    FloatRaster depth;
    FloatRaster confidence;  // in [0, 1]
    Camera camera;
    bool confidence_missing = false;

    /// Throws Error(Data) on mismatched sizes or confidence outside [0, 1].
    void validate() const;

    /// Applies a similarity to the camera and rescales depth by its scale.
    DepthPrior aligned(const SimilarityTransform& T) const;
};

/// Writes `<stem>.depth.imgf` and `<stem>.conf.imgf`.
void save_prior(const std::string& stem, const DepthPrior& prior);

/// Reads the rasters written by save_prior and attaches `camera`. A missing
/// confidence file yields all-ones confidence and sets confidence_missing.
DepthPrior load_prior(const std::string& stem, const Camera& camera);

}  // namespace voxforge
