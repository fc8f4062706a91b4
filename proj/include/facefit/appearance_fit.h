/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/appearance_fit.h
 *
 * Copyright 2026 The facefit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <optional>
#include <vector>

#include "facefit/camera.h"
#include "facefit/image.h"
#include "facefit/rasterizer.h"
#include "facefit/rig.h"
#include "facefit/shading.h"

namespace facefit {

struct AppearanceFitOptions
{
    int iterations = 5;
    double albedo_smoothness = 1e-2;
    /// Tiny pull of unobserved albedo toward zero; keeps the normal
    /// equations full rank on meshes with uncovered components.
    double albedo_anchor = 1e-6;
    int min_covered_pixels = 100;
    Eigen::Vector3d initial_albedo{0.5, 0.5, 0.5};
    /// Pixels to ignore (e.g. fiducial disks baked into the plate);
    /// same size as the captured image, nonzero = skip.
    std::optional<std::vector<uint8_t>> exclude_mask;
    RenderOptions render;
};

/// Estimates per-vertex albedo and the 9 SH light coefficients per channel
/// from one captured frame and the posed surface, by alternating two linear
/// least-squares solves (SH with albedo fixed, then albedo with SH fixed and
/// a neighbor-smoothness regularizer) for a fixed iteration count.
/// Throws FaceFitError when fewer than min_covered_pixels are usable.
AppearanceModel fit_appearance(const Image& captured, const Camera& camera,
                               const MeshSurface& posed_surface,
                               const AppearanceFitOptions& options = {});

} // namespace facefit
