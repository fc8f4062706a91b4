/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/image.h
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

#include <cassert>
#include <vector>

#include <Eigen/Core>

namespace facefit {

/**
 * Dense float image, interleaved channels, values nominally in [0, 1].
 *
 * Coordinate convention used throughout the library: pixel (y, x) sits at
 * continuous position (x, y); continuous sampling interpolates the integer
 * grid directly (no half-pixel offsets). All resize/crop maps are pure
 * linear index maps `source = origin + index * scale`.
 */
class Image
{
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0)
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<size_t>(height) * width * channels, fill)
    {
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }
    size_t size() const { return data_.size(); }

    double& at(int y, int x, int c)
    {
        assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < channels_);
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int y, int x, int c) const
    {
        assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < channels_);
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }

    Eigen::Vector3d rgb(int y, int x) const
    {
        assert(channels_ == 3);
        const size_t i = (static_cast<size_t>(y) * width_ + x) * 3;
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set_rgb(int y, int x, const Eigen::Vector3d& v)
    {
        assert(channels_ == 3);
        const size_t i = (static_cast<size_t>(y) * width_ + x) * 3;
        data_[i] = v[0];
        data_[i + 1] = v[1];
        data_[i + 2] = v[2];
    }

    bool same_shape(const Image& other) const
    {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Bilinear sample at continuous index position (x, y), edge-clamped.
double bilinear_sample(const Image& img, double x, double y, int c);

/// Adjoint of bilinear_sample: scatters `value` back onto the integer grid.
void bilinear_scatter(Image& img, double x, double y, int c, double value);

/// Resize with the pure index map `source = index * (in_size / out_size)`.
Image resize_bilinear(const Image& img, int out_height, int out_width);

/// Adjoint of resize_bilinear for the given input shape.
Image resize_bilinear_adjoint(const Image& cotangent, int in_height, int in_width);

/// Luminance conversion (0.299, 0.587, 0.114); identity for 1-channel input.
Eigen::ArrayXXd to_gray(const Image& img);

/// Adjoint of to_gray back onto a `channels`-channel image cotangent.
Image to_gray_adjoint(const Eigen::ArrayXXd& cotangent, int channels);

/// 2x2 box-mean downsample (both dimensions must be even).
Eigen::ArrayXXd downsample2x(const Eigen::ArrayXXd& in);
Eigen::ArrayXXd downsample2x_adjoint(const Eigen::ArrayXXd& cotangent);

/// Bilinear 2x upsample to the exact target size (index map scale = in/out).
Eigen::ArrayXXd upsample_bilinear(const Eigen::ArrayXXd& in, int out_height, int out_width);
Eigen::ArrayXXd upsample_bilinear_adjoint(const Eigen::ArrayXXd& cotangent, int in_height,
                                          int in_width);

/// Central-difference x/y gradients (one-sided at borders) and adjoints.
Eigen::ArrayXXd grad_x(const Eigen::ArrayXXd& in);
Eigen::ArrayXXd grad_y(const Eigen::ArrayXXd& in);
Eigen::ArrayXXd grad_x_adjoint(const Eigen::ArrayXXd& cotangent);
Eigen::ArrayXXd grad_y_adjoint(const Eigen::ArrayXXd& cotangent);

} // namespace facefit
