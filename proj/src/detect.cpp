/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/detect.cpp
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
#include "facefit/detect.h"

#include <cmath>

namespace facefit {

BoundingBox detect_bbox(const Image& image, const DetectBboxOptions& options)
{
    if (image.empty())
        throw DetectionFailed("detect_bbox: empty image");
    int min_x = image.width(), max_x = -1, min_y = image.height(), max_y = -1;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            double diff = 0.0;
            for (int c = 0; c < image.channels(); ++c)
                diff = std::max(diff, std::abs(image.at(y, x, c) - options.background[std::min(c, 2)]));
            if (diff > options.threshold) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
        }
    }
    if (max_x < 0)
        throw DetectionFailed("detect_bbox: no foreground pixels");
    BoundingBox box;
    box.min = {static_cast<double>(min_x), static_cast<double>(min_y)};
    box.max = {static_cast<double>(max_x + 1), static_cast<double>(max_y + 1)};
    const double pad_x = options.margin * box.width();
    const double pad_y = options.margin * box.height();
    box.min.x() = std::max(0.0, box.min.x() - pad_x);
    box.min.y() = std::max(0.0, box.min.y() - pad_y);
    box.max.x() = std::min(static_cast<double>(image.width()), box.max.x() + pad_x);
    box.max.y() = std::min(static_cast<double>(image.height()), box.max.y() + pad_y);
    return box;
}

CropResize crop_resize(const Image& image, const BoundingBox& bbox, int target)
{
    if (bbox.empty() || target <= 0)
        throw DegenerateInput("crop_resize: degenerate box or target");
    CropResize out;
    out.transform.bbox = bbox;
    out.transform.target = target;
    out.transform.scale = {bbox.width() / target, bbox.height() / target};
    out.image = Image(target, target, image.channels());
    for (int y = 0; y < target; ++y) {
        const double sy = bbox.min.y() + y * out.transform.scale.y();
        for (int x = 0; x < target; ++x) {
            const double sx = bbox.min.x() + x * out.transform.scale.x();
            for (int c = 0; c < image.channels(); ++c)
                out.image.at(y, x, c) = bilinear_sample(image, sx, sy, c);
        }
    }
    return out;
}

std::vector<PixelCotangent> crop_resize_vjp(const CropResizeTransform& transform,
                                            const Image& full_image,
                                            const std::vector<PixelCotangent>& crop_cotangent)
{
    // Scatter through the same clamped bilinear taps used by the forward map.
    Image probe(full_image.height(), full_image.width(), full_image.channels());
    for (const PixelCotangent& pc : crop_cotangent) {
        const double sx = transform.bbox.min.x() + pc.x * transform.scale.x();
        const double sy = transform.bbox.min.y() + pc.y * transform.scale.y();
        bilinear_scatter(probe, sx, sy, pc.c, pc.value);
    }
    std::vector<PixelCotangent> out;
    for (int y = 0; y < probe.height(); ++y)
        for (int x = 0; x < probe.width(); ++x)
            for (int c = 0; c < probe.channels(); ++c)
                if (probe.at(y, x, c) != 0.0)
                    out.push_back({y, x, c, probe.at(y, x, c)});
    return out;
}

SoftArgmax soft_argmax(const Eigen::MatrixXd& heatmap, double beta)
{
    const int h = static_cast<int>(heatmap.rows());
    const int w = static_cast<int>(heatmap.cols());
    if (h < 3 || w < 3)
        throw DegenerateInput("soft_argmax: heatmap smaller than the 3x3 patch");
    SoftArgmax out;
    int my = 0, mx = 0;
    out.peak = heatmap(0, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (heatmap(y, x) > out.peak) {
                out.peak = heatmap(y, x);
                my = y;
                mx = x;
            }
        }
    }
    const int cy = std::clamp(my, 1, h - 2);
    const int cx = std::clamp(mx, 1, w - 2);
    out.patch_corner = {cx - 1, cy - 1};
    double denom = 0.0;
    Eigen::Vector2d num = Eigen::Vector2d::Zero();
    for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
            const int yy = cy - 1 + dy, xx = cx - 1 + dx;
            const double e = std::exp(beta * (heatmap(yy, xx) - out.peak));
            out.weights(dy, dx) = e;
            denom += e;
            num += e * Eigen::Vector2d(xx, yy);
        }
    }
    out.weights /= denom;
    out.coord = num / denom;
    return out;
}

Eigen::Matrix3d soft_argmax_vjp(const SoftArgmax& r, const Eigen::Vector2d& cot, double beta)
{
    Eigen::Matrix3d out;
    for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
            const Eigen::Vector2d m(r.patch_corner.x() + dx, r.patch_corner.y() + dy);
            out(dy, dx) = beta * r.weights(dy, dx) * (m - r.coord).dot(cot);
        }
    }
    return out;
}

Eigen::Vector2d uncrop_coords(const Eigen::Vector2d& coord64, const CropResizeTransform& transform)
{
    return transform.to_full(4.0 * coord64);
}

Eigen::Vector2d uncrop_scale(const CropResizeTransform& transform)
{
    return 4.0 * transform.scale;
}

} // namespace facefit
