/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/detect.h
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

#include <vector>

#include <Eigen/Core>

#include "facefit/common.h"
#include "facefit/image.h"

namespace facefit {

/// Axis-aligned box in full-resolution index coordinates; max is exclusive,
/// so a box covering a whole W x H image is [0, W) x [0, H).
struct BoundingBox
{
    Eigen::Vector2d min = Eigen::Vector2d::Zero();
    Eigen::Vector2d max = Eigen::Vector2d::Zero();

    double width() const { return max.x() - min.x(); }
    double height() const { return max.y() - min.y(); }
    bool empty() const { return !(width() > 0.0) || !(height() > 0.0); }
};

struct DetectBboxOptions
{
    Eigen::Vector3d background{0.5, 0.5, 0.5};
    double threshold = 0.02; // max-abs channel difference counted as foreground
    double margin = 0.10;    // padding per side, relative to box size
};

/// Reference face detector for synthetic footage: the bounding box of pixels
/// whose color differs from the background beyond a threshold, padded and
/// clamped. Throws DetectionFailed when nothing is found. Treated as a
/// constant by every Jacobian in the library.
BoundingBox detect_bbox(const Image& image, const DetectBboxOptions& options = {});

/// Invertible map between crop space and full resolution:
/// full = bbox.min + crop_coord * scale, scale = bbox_size / target_size.
struct CropResizeTransform
{
    BoundingBox bbox;
    int target = 256;
    Eigen::Vector2d scale = Eigen::Vector2d::Ones();

    Eigen::Vector2d to_full(const Eigen::Vector2d& crop_coord) const
    {
        return bbox.min + crop_coord.cwiseProduct(scale);
    }
    Eigen::Vector2d to_crop(const Eigen::Vector2d& full_coord) const
    {
        return (full_coord - bbox.min).cwiseQuotient(scale);
    }
};

struct CropResize
{
    Image image; // target x target
    CropResizeTransform transform;
};

/// Crop the box and bilinearly resize it to target x target. When the box is
/// the identity box of a target-sized image the output equals the input
/// bit-exactly. Throws DegenerateInput for empty boxes.
CropResize crop_resize(const Image& image, const BoundingBox& bbox, int target = 256);

/// Adjoint of crop_resize: scatters a sparse crop-space cotangent back onto
/// the full-resolution grid.
std::vector<PixelCotangent> crop_resize_vjp(const CropResizeTransform& transform,
                                            const Image& full_image,
                                            const std::vector<PixelCotangent>& crop_cotangent);

struct SoftArgmax
{
    Eigen::Vector2d coord = Eigen::Vector2d::Zero(); // (x, y) on the heatmap grid
    Eigen::Vector2i patch_corner = Eigen::Vector2i::Zero(); // top-left of the 3x3 patch
    Eigen::Matrix3d weights = Eigen::Matrix3d::Zero();      // softmax weights, (dy, dx)
    double peak = 0.0; // heatmap maximum, used as detection confidence
};

/**
 * Soft-argmax over the 3x3 patch around the heatmap argmax:
 * sum_m m exp(beta H(m)) / sum_m exp(beta H(m)). The patch is clamped at the
 * heatmap border and, like the detector output, held fixed by the chain rule.
 */
SoftArgmax soft_argmax(const Eigen::MatrixXd& heatmap, double beta = 50.0);

/// d coord / d H(m) contracted with a coordinate cotangent; returns the 3x3
/// patch cotangent (same (dy, dx) layout as SoftArgmax::weights).
Eigen::Matrix3d soft_argmax_vjp(const SoftArgmax& result, const Eigen::Vector2d& cotangent,
                                double beta = 50.0);

/// Maps a heatmap-grid coordinate (64-space) back to full resolution:
/// multiply by 4 (64 -> 256), then apply the inverse crop/resize map.
Eigen::Vector2d uncrop_coords(const Eigen::Vector2d& coord64, const CropResizeTransform& transform);

/// Constant Jacobian of uncrop_coords (diagonal 4 * scale).
Eigen::Vector2d uncrop_scale(const CropResizeTransform& transform);

} // namespace facefit
