/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/feature_backend.cpp
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
#include "facefit/feature_backend.h"

#include <cmath>

namespace facefit {

void HeatmapStack::validate() const
{
    if (static_cast<int>(maps.size()) != kNumLandmarks)
        throw FaceFitError("heatmap stack must hold 68 maps");
    for (const auto& m : maps) {
        if (m.rows() != kHeatmapSize || m.cols() != kHeatmapSize)
            throw FaceFitError("heatmap must be 64 x 64");
        if (!m.allFinite())
            throw FaceFitError("heatmap contains non-finite values");
    }
}

BlobFeatureBackend::BlobFeatureBackend(std::vector<Eigen::Vector3d> palette, BlobBackendOptions options)
    : palette_(std::move(palette)), options_(options)
{
    if (static_cast<int>(palette_.size()) != kNumLandmarks)
        throw FaceFitError("blob backend needs one palette color per landmark");
}

namespace {

// Quartic-exponent similarity gate: ~1 inside the disk core, ~0 for every
// other color in the scene; smooth in the image values.
inline double gate_value(double d2, double inv_sigma4)
{
    const double u = d2 * d2 * inv_sigma4;
    return u > 36.0 ? 0.0 : std::exp(-u);
}

} // namespace

HeatmapStack BlobFeatureBackend::heatmaps(const Image& img) const
{
    if (img.height() != kCropSize || img.width() != kCropSize || img.channels() != 3)
        throw FaceFitError("blob backend expects a 256 x 256 RGB crop");
    const double s2 = options_.sigma_color * options_.sigma_color;
    const double inv_sigma4 = 1.0 / (s2 * s2);
    const int hw = options_.window_halfwidth;
    HeatmapStack out;
    out.maps.assign(kNumLandmarks, Eigen::MatrixXd(kHeatmapSize, kHeatmapSize));
    Eigen::MatrixXd gate(kCropSize, kCropSize);
    // Summed-area table with a leading zero row/column.
    Eigen::MatrixXd sat(kCropSize + 1, kCropSize + 1);
    for (int i = 0; i < kNumLandmarks; ++i) {
        const Eigen::Vector3d& c = palette_[i];
        for (int y = 0; y < kCropSize; ++y)
            for (int x = 0; x < kCropSize; ++x)
                gate(y, x) = gate_value((img.rgb(y, x) - c).squaredNorm(), inv_sigma4);
        sat.setZero();
        for (int y = 0; y < kCropSize; ++y)
            for (int x = 0; x < kCropSize; ++x)
                sat(y + 1, x + 1) = gate(y, x) + sat(y, x + 1) + sat(y + 1, x) - sat(y, x);
        Eigen::MatrixXd& m = out.maps[i];
        for (int hy = 0; hy < kHeatmapSize; ++hy) {
            const int y0 = std::max(0, 4 * hy - hw), y1 = std::min(kCropSize - 1, 4 * hy + hw);
            for (int hx = 0; hx < kHeatmapSize; ++hx) {
                const int x0 = std::max(0, 4 * hx - hw), x1 = std::min(kCropSize - 1, 4 * hx + hw);
                const double sum = sat(y1 + 1, x1 + 1) - sat(y0, x1 + 1) - sat(y1 + 1, x0) + sat(y0, x0);
                m(hy, hx) = options_.amplitude * sum / ((y1 - y0 + 1) * (x1 - x0 + 1));
            }
        }
    }
    return out;
}

std::vector<PixelCotangent> BlobFeatureBackend::vjp(const Image& img,
                                                    const std::vector<HeatmapCotangent>& cot) const
{
    const double s2 = options_.sigma_color * options_.sigma_color;
    const double inv_sigma4 = 1.0 / (s2 * s2);
    const int hw = options_.window_halfwidth;
    Image acc(img.height(), img.width(), 3);
    for (const HeatmapCotangent& hc : cot) {
        const Eigen::Vector3d& c = palette_[hc.landmark];
        const int y0 = std::max(0, 4 * hc.y - hw), y1 = std::min(kCropSize - 1, 4 * hc.y + hw);
        const int x0 = std::max(0, 4 * hc.x - hw), x1 = std::min(kCropSize - 1, 4 * hc.x + hw);
        const double lead = hc.value * options_.amplitude / ((y1 - y0 + 1) * (x1 - x0 + 1));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Eigen::Vector3d d = img.rgb(y, x) - c;
                const double d2 = d.squaredNorm();
                const double g = gate_value(d2, inv_sigma4);
                if (g == 0.0)
                    continue;
                // d gate / d rgb = gate * (-2 d2 / sigma^4) * 2 d
                const Eigen::Vector3d grad = lead * g * (-4.0 * d2 * inv_sigma4) * d;
                acc.at(y, x, 0) += grad[0];
                acc.at(y, x, 1) += grad[1];
                acc.at(y, x, 2) += grad[2];
            }
        }
    }
    std::vector<PixelCotangent> out;
    for (int y = 0; y < acc.height(); ++y)
        for (int x = 0; x < acc.width(); ++x)
            for (int c = 0; c < 3; ++c)
                if (acc.at(y, x, c) != 0.0)
                    out.push_back({y, x, c, acc.at(y, x, c)});
    return out;
}

std::vector<Eigen::Vector3d> fiducial_palette(int count)
{
    // Distance from c to the segment {s * base : s in [s0, s1]}; shaded skin
    // lives near scaled-albedo lines, so exclusion tubes around them keep the
    // palette clear of anything the face itself can produce.
    const auto segment_distance = [](const Eigen::Vector3d& c, const Eigen::Vector3d& base, double s0,
                                     double s1) {
        const double s = std::clamp(c.dot(base) / base.squaredNorm(), s0, s1);
        return (c - s * base).norm();
    };
    const Eigen::Vector3d skin(0.78, 0.62, 0.52), lips(0.70, 0.38, 0.38), brows(0.42, 0.32, 0.26);
    const Eigen::Vector3d background(0.5, 0.5, 0.5);

    std::vector<Eigen::Vector3d> candidates;
    const int grid = 13;
    for (int r = 0; r < grid; ++r)
        for (int g = 0; g < grid; ++g)
            for (int b = 0; b < grid; ++b) {
                const Eigen::Vector3d c(r / double(grid - 1), g / double(grid - 1), b / double(grid - 1));
                if ((c - background).norm() < 0.30)
                    continue;
                if (segment_distance(c, skin, 0.05, 1.35) < 0.22 ||
                    segment_distance(c, lips, 0.05, 1.35) < 0.22 ||
                    segment_distance(c, brows, 0.05, 1.35) < 0.22)
                    continue;
                candidates.push_back(c);
            }
    std::vector<Eigen::Vector3d> picked;
    picked.reserve(count);
    picked.push_back(Eigen::Vector3d(0.0, 1.0, 0.0)); // fixed deterministic seed point
    std::vector<double> dist(candidates.size(), std::numeric_limits<double>::infinity());
    while (static_cast<int>(picked.size()) < count) {
        int best = -1;
        double best_d = -1.0;
        for (size_t i = 0; i < candidates.size(); ++i) {
            dist[i] = std::min(dist[i], (candidates[i] - picked.back()).norm());
            if (dist[i] > best_d) {
                best_d = dist[i];
                best = static_cast<int>(i);
            }
        }
        picked.push_back(candidates[best]);
    }
    return picked;
}

std::vector<PixelCotangent> LandmarkExtraction::image_cotangent(int landmark,
                                                                const Eigen::Vector2d& cotangent,
                                                                const Image& full_image) const
{
    if (!landmarks.valid[landmark])
        return {};
    // Through the constant uncrop map.
    const Eigen::Vector2d scale = uncrop_scale(transform);
    const Eigen::Vector2d cot64(cotangent.x() * scale.x(), cotangent.y() * scale.y());
    // Through the soft-argmax patch.
    const Eigen::Matrix3d patch = soft_argmax_vjp(argmax[landmark], cot64, options.beta);
    std::vector<HeatmapCotangent> hcot;
    for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx)
            if (patch(dy, dx) != 0.0)
                hcot.push_back({landmark, argmax[landmark].patch_corner.y() + dy,
                                argmax[landmark].patch_corner.x() + dx, patch(dy, dx)});
    // Through the backend and crop/resize.
    const std::vector<PixelCotangent> crop_cot = backend->vjp(image256, hcot);
    return crop_resize_vjp(transform, full_image, crop_cot);
}

LandmarkExtraction extract_landmarks(const FeatureBackend& backend, const Image& image,
                                     const BoundingBox& bbox, const DetectOptions& options)
{
    LandmarkExtraction out;
    out.backend = &backend;
    out.options = options;
    out.bbox = bbox;
    CropResize cr = crop_resize(image, bbox, kCropSize);
    out.transform = cr.transform;
    out.image256 = std::move(cr.image);
    out.heatmaps = backend.heatmaps(out.image256);
    out.heatmaps.validate();
    for (int i = 0; i < kNumLandmarks; ++i) {
        out.argmax[i] = soft_argmax(out.heatmaps.maps[i], options.beta);
        out.landmarks.points[i] = uncrop_coords(out.argmax[i].coord, out.transform);
        out.landmarks.confidence[i] = out.argmax[i].peak;
        out.landmarks.valid[i] = out.argmax[i].peak >= options.min_peak;
    }
    return out;
}

} // namespace facefit
