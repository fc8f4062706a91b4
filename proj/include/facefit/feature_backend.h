/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/feature_backend.h
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

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "facefit/detect.h"
#include "facefit/image.h"
#include "facefit/rig.h"

namespace facefit {

constexpr int kHeatmapSize = 64;
constexpr int kCropSize = 256;

/// 68 heatmaps of 64 x 64 non-negative scores.
struct HeatmapStack
{
    std::vector<Eigen::MatrixXd> maps; // kNumLandmarks entries, rows = y

    void validate() const;
};

/// Sparse cotangent on the heatmap stack: one entry per touched heatmap pixel.
struct HeatmapCotangent
{
    int landmark = 0;
    int y = 0;
    int x = 0;
    double value = 0.0;
};

/// 68 landmark positions in full-resolution pixel coordinates with
/// per-point confidence (the heatmap peak) and validity flags.
struct LandmarkSet
{
    std::array<Eigen::Vector2d, kNumLandmarks> points{};
    std::array<double, kNumLandmarks> confidence{};
    std::array<bool, kNumLandmarks> valid{};
};

/// Differentiable image -> heatmap map. Implementations must keep vjp
/// consistent with heatmaps (finite-difference testable).
class FeatureBackend
{
public:
    virtual ~FeatureBackend() = default;
    virtual HeatmapStack heatmaps(const Image& image256) const = 0;
    virtual std::vector<PixelCotangent> vjp(const Image& image256,
                                            const std::vector<HeatmapCotangent>& cotangent) const = 0;
};

/**
 * Reference backend: each heatmap pixel scores the fraction of a local
 * window whose color passes a sharp similarity gate for that landmark's
 * fiducial color,
 *   H_i(hy, hx) = amplitude * mean_{window at (4hy, 4hx)}
 *                 exp(-(|rgb - color_i| / sigma_color)^4).
 * The quartic gate keeps other landmarks' disks and the face itself at
 * score ~0, while the window-coverage fraction varies linearly with the
 * disk's sub-pixel position, which is what makes the soft-argmax output
 * smooth in the underlying geometry. Entirely image-driven, no trained
 * weights.
 */
struct BlobBackendOptions
{
    double amplitude = 0.16;
    double sigma_color = 0.18;
    int window_halfwidth = 4; // 9x9 crop-space window per heatmap pixel
};

class BlobFeatureBackend : public FeatureBackend
{
public:
    BlobFeatureBackend(std::vector<Eigen::Vector3d> palette, BlobBackendOptions options = {});

    HeatmapStack heatmaps(const Image& image256) const override;
    std::vector<PixelCotangent> vjp(const Image& image256,
                                    const std::vector<HeatmapCotangent>& cotangent) const override;

    const std::vector<Eigen::Vector3d>& palette() const { return palette_; }
    const BlobBackendOptions& options() const { return options_; }

private:
    std::vector<Eigen::Vector3d> palette_;
    BlobBackendOptions options_;
};

/// Deterministic well-separated fiducial palette: greedy maximin selection
/// from an RGB lattice after removing colors near the render background and
/// near shaded skin tones (scaled skin/lip/brow albedo lines), so no face or
/// background pixel competes with a disk for its own hue.
std::vector<Eigen::Vector3d> fiducial_palette(int count = kNumLandmarks);

struct DetectOptions
{
    double beta = 50.0;      // soft-argmax temperature
    double min_peak = 0.1;   // heatmap maximum below this flags the landmark invalid
};

/**
 * Full landmark chain on one image: crop/resize to 256, backend heatmaps,
 * patch soft-argmax per landmark, coordinates mapped back to full
 * resolution. Retains every intermediate needed to propagate landmark
 * cotangents back to the full-resolution image with the detector and the
 * argmax patches held fixed.
 */
struct LandmarkExtraction
{
    LandmarkSet landmarks;
    BoundingBox bbox;
    CropResizeTransform transform;
    Image image256;
    HeatmapStack heatmaps;
    std::array<SoftArgmax, kNumLandmarks> argmax{};
    const FeatureBackend* backend = nullptr;
    DetectOptions options;

    /// Cotangent on landmark i's full-resolution coordinates, pulled back to
    /// the full-resolution image (sparse).
    std::vector<PixelCotangent> image_cotangent(int landmark, const Eigen::Vector2d& cotangent,
                                                const Image& full_image) const;
};

LandmarkExtraction extract_landmarks(const FeatureBackend& backend, const Image& image,
                                     const BoundingBox& bbox, const DetectOptions& options = {});

} // namespace facefit
