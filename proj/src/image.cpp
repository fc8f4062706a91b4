/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/image.cpp
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
#include "facefit/image.h"

#include <algorithm>
#include <cmath>

namespace facefit {

namespace {

// Clamped integer neighbors and weights for sampling at continuous index q.
struct LinearTap
{
    int i0, i1;
    double w0, w1;
};

LinearTap tap(double q, int size)
{
    LinearTap t;
    if (q <= 0.0) {
        t.i0 = t.i1 = 0;
        t.w0 = 1.0;
        t.w1 = 0.0;
        return t;
    }
    if (q >= size - 1) {
        t.i0 = t.i1 = size - 1;
        t.w0 = 1.0;
        t.w1 = 0.0;
        return t;
    }
    const double f = std::floor(q);
    t.i0 = static_cast<int>(f);
    t.i1 = t.i0 + 1;
    t.w1 = q - f;
    t.w0 = 1.0 - t.w1;
    return t;
}

} // namespace

double bilinear_sample(const Image& img, double x, double y, int c)
{
    const LinearTap tx = tap(x, img.width());
    const LinearTap ty = tap(y, img.height());
    return ty.w0 * (tx.w0 * img.at(ty.i0, tx.i0, c) + tx.w1 * img.at(ty.i0, tx.i1, c)) +
           ty.w1 * (tx.w0 * img.at(ty.i1, tx.i0, c) + tx.w1 * img.at(ty.i1, tx.i1, c));
}

void bilinear_scatter(Image& img, double x, double y, int c, double value)
{
    const LinearTap tx = tap(x, img.width());
    const LinearTap ty = tap(y, img.height());
    img.at(ty.i0, tx.i0, c) += ty.w0 * tx.w0 * value;
    img.at(ty.i0, tx.i1, c) += ty.w0 * tx.w1 * value;
    img.at(ty.i1, tx.i0, c) += ty.w1 * tx.w0 * value;
    img.at(ty.i1, tx.i1, c) += ty.w1 * tx.w1 * value;
}

Image resize_bilinear(const Image& img, int out_height, int out_width)
{
    Image out(out_height, out_width, img.channels());
    const double sy = static_cast<double>(img.height()) / out_height;
    const double sx = static_cast<double>(img.width()) / out_width;
    for (int y = 0; y < out_height; ++y) {
        const LinearTap ty = tap(y * sy, img.height());
        for (int x = 0; x < out_width; ++x) {
            const LinearTap tx = tap(x * sx, img.width());
            for (int c = 0; c < img.channels(); ++c) {
                out.at(y, x, c) =
                    ty.w0 * (tx.w0 * img.at(ty.i0, tx.i0, c) + tx.w1 * img.at(ty.i0, tx.i1, c)) +
                    ty.w1 * (tx.w0 * img.at(ty.i1, tx.i0, c) + tx.w1 * img.at(ty.i1, tx.i1, c));
            }
        }
    }
    return out;
}

Image resize_bilinear_adjoint(const Image& cot, int in_height, int in_width)
{
    Image out(in_height, in_width, cot.channels());
    const double sy = static_cast<double>(in_height) / cot.height();
    const double sx = static_cast<double>(in_width) / cot.width();
    for (int y = 0; y < cot.height(); ++y) {
        for (int x = 0; x < cot.width(); ++x) {
            for (int c = 0; c < cot.channels(); ++c) {
                const double v = cot.at(y, x, c);
                if (v != 0.0)
                    bilinear_scatter(out, x * sx, y * sy, c, v);
            }
        }
    }
    return out;
}

Eigen::ArrayXXd to_gray(const Image& img)
{
    Eigen::ArrayXXd out(img.height(), img.width());
    if (img.channels() == 1) {
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                out(y, x) = img.at(y, x, 0);
        return out;
    }
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
    return out;
}

Image to_gray_adjoint(const Eigen::ArrayXXd& cot, int channels)
{
    Image out(static_cast<int>(cot.rows()), static_cast<int>(cot.cols()), channels);
    const double w[3] = {0.299, 0.587, 0.114};
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            if (channels == 1) {
                out.at(y, x, 0) = cot(y, x);
            } else {
                for (int c = 0; c < 3; ++c)
                    out.at(y, x, c) = w[c] * cot(y, x);
            }
        }
    }
    return out;
}

Eigen::ArrayXXd downsample2x(const Eigen::ArrayXXd& in)
{
    const int h = static_cast<int>(in.rows()) / 2;
    const int w = static_cast<int>(in.cols()) / 2;
    Eigen::ArrayXXd out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out(y, x) =
                0.25 * (in(2 * y, 2 * x) + in(2 * y, 2 * x + 1) + in(2 * y + 1, 2 * x) + in(2 * y + 1, 2 * x + 1));
    return out;
}

Eigen::ArrayXXd downsample2x_adjoint(const Eigen::ArrayXXd& cot)
{
    Eigen::ArrayXXd out(cot.rows() * 2, cot.cols() * 2);
    for (int y = 0; y < cot.rows(); ++y) {
        for (int x = 0; x < cot.cols(); ++x) {
            const double v = 0.25 * cot(y, x);
            out(2 * y, 2 * x) = v;
            out(2 * y, 2 * x + 1) = v;
            out(2 * y + 1, 2 * x) = v;
            out(2 * y + 1, 2 * x + 1) = v;
        }
    }
    return out;
}

Eigen::ArrayXXd upsample_bilinear(const Eigen::ArrayXXd& in, int out_height, int out_width)
{
    Eigen::ArrayXXd out(out_height, out_width);
    const int ih = static_cast<int>(in.rows());
    const int iw = static_cast<int>(in.cols());
    const double sy = static_cast<double>(ih) / out_height;
    const double sx = static_cast<double>(iw) / out_width;
    for (int y = 0; y < out_height; ++y) {
        const LinearTap ty = tap(y * sy, ih);
        for (int x = 0; x < out_width; ++x) {
            const LinearTap tx = tap(x * sx, iw);
            out(y, x) = ty.w0 * (tx.w0 * in(ty.i0, tx.i0) + tx.w1 * in(ty.i0, tx.i1)) +
                        ty.w1 * (tx.w0 * in(ty.i1, tx.i0) + tx.w1 * in(ty.i1, tx.i1));
        }
    }
    return out;
}

Eigen::ArrayXXd upsample_bilinear_adjoint(const Eigen::ArrayXXd& cot, int in_height, int in_width)
{
    Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(in_height, in_width);
    const double sy = static_cast<double>(in_height) / cot.rows();
    const double sx = static_cast<double>(in_width) / cot.cols();
    for (int y = 0; y < cot.rows(); ++y) {
        const LinearTap ty = tap(y * sy, in_height);
        for (int x = 0; x < cot.cols(); ++x) {
            const LinearTap tx = tap(x * sx, in_width);
            const double v = cot(y, x);
            out(ty.i0, tx.i0) += ty.w0 * tx.w0 * v;
            out(ty.i0, tx.i1) += ty.w0 * tx.w1 * v;
            out(ty.i1, tx.i0) += ty.w1 * tx.w0 * v;
            out(ty.i1, tx.i1) += ty.w1 * tx.w1 * v;
        }
    }
    return out;
}

Eigen::ArrayXXd grad_x(const Eigen::ArrayXXd& in)
{
    const int h = static_cast<int>(in.rows());
    const int w = static_cast<int>(in.cols());
    Eigen::ArrayXXd out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (x == 0)
                out(y, x) = w > 1 ? in(y, 1) - in(y, 0) : 0.0;
            else if (x == w - 1)
                out(y, x) = in(y, w - 1) - in(y, w - 2);
            else
                out(y, x) = 0.5 * (in(y, x + 1) - in(y, x - 1));
        }
    }
    return out;
}

Eigen::ArrayXXd grad_y(const Eigen::ArrayXXd& in)
{
    const int h = static_cast<int>(in.rows());
    const int w = static_cast<int>(in.cols());
    Eigen::ArrayXXd out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (y == 0)
                out(y, x) = h > 1 ? in(1, x) - in(0, x) : 0.0;
            else if (y == h - 1)
                out(y, x) = in(h - 1, x) - in(h - 2, x);
            else
                out(y, x) = 0.5 * (in(y + 1, x) - in(y - 1, x));
        }
    }
    return out;
}

Eigen::ArrayXXd grad_x_adjoint(const Eigen::ArrayXXd& cot)
{
    const int h = static_cast<int>(cot.rows());
    const int w = static_cast<int>(cot.cols());
    Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = cot(y, x);
            if (v == 0.0)
                continue;
            if (x == 0) {
                if (w > 1) {
                    out(y, 1) += v;
                    out(y, 0) -= v;
                }
            } else if (x == w - 1) {
                out(y, w - 1) += v;
                out(y, w - 2) -= v;
            } else {
                out(y, x + 1) += 0.5 * v;
                out(y, x - 1) -= 0.5 * v;
            }
        }
    }
    return out;
}

Eigen::ArrayXXd grad_y_adjoint(const Eigen::ArrayXXd& cot)
{
    const int h = static_cast<int>(cot.rows());
    const int w = static_cast<int>(cot.cols());
    Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = cot(y, x);
            if (v == 0.0)
                continue;
            if (y == 0) {
                if (h > 1) {
                    out(1, x) += v;
                    out(0, x) -= v;
                }
            } else if (y == h - 1) {
                out(h - 1, x) += v;
                out(h - 2, x) -= v;
            } else {
                out(y + 1, x) += 0.5 * v;
                out(y - 1, x) -= 0.5 * v;
            }
        }
    }
    return out;
}

} // namespace facefit
