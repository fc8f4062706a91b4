/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/shading.cpp
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
#include "facefit/shading.h"

namespace facefit {

namespace {
constexpr double k0 = 0.28209479177387814; // 1/2 sqrt(1/pi)
constexpr double k1 = 0.4886025119029199;  // sqrt(3/(4 pi))
constexpr double k2 = 1.0925484305920792;  // sqrt(15/(4 pi))
constexpr double k3 = 0.31539156525252005; // 1/4 sqrt(5/pi)
constexpr double k4 = 0.5462742152960396;  // 1/4 sqrt(15/pi)
} // namespace

AppearanceModel AppearanceModel::constant(int nverts, const Eigen::Vector3d& albedo_rgb, double ambient)
{
    AppearanceModel m;
    m.albedo.resize(3, nverts);
    m.albedo.colwise() = albedo_rgb;
    m.sh_coeffs.row(0).setConstant(ambient);
    return m;
}

void AppearanceModel::validate(int nverts) const
{
    if (albedo.cols() != nverts)
        throw FaceFitError("appearance albedo count does not match vertex count");
    if ((albedo.array() < 0.0).any() || (albedo.array() > 1.0).any())
        throw FaceFitError("albedo outside [0, 1]");
}

Eigen::Matrix<double, 9, 1> sh_basis(const Eigen::Vector3d& n)
{
    const double x = n.x(), y = n.y(), z = n.z();
    Eigen::Matrix<double, 9, 1> b;
    b[0] = k0;
    b[1] = k1 * y;
    b[2] = k1 * z;
    b[3] = k1 * x;
    b[4] = k2 * x * y;
    b[5] = k2 * y * z;
    b[6] = k3 * (3.0 * z * z - 1.0);
    b[7] = k2 * x * z;
    b[8] = k4 * (x * x - y * y);
    return b;
}

Eigen::Matrix<double, 9, 3> sh_basis_gradient(const Eigen::Vector3d& n)
{
    const double x = n.x(), y = n.y(), z = n.z();
    Eigen::Matrix<double, 9, 3> g = Eigen::Matrix<double, 9, 3>::Zero();
    g(1, 1) = k1;
    g(2, 2) = k1;
    g(3, 0) = k1;
    g(4, 0) = k2 * y;
    g(4, 1) = k2 * x;
    g(5, 1) = k2 * z;
    g(5, 2) = k2 * y;
    g(6, 2) = k3 * 6.0 * z;
    g(7, 0) = k2 * z;
    g(7, 2) = k2 * x;
    g(8, 0) = k4 * 2.0 * x;
    g(8, 1) = -k4 * 2.0 * y;
    return g;
}

ShadeResult shade(const Eigen::Vector3d& normal, const Eigen::Vector3d& albedo,
                  const Eigen::Matrix<double, 9, 3>& sh_coeffs)
{
    const Eigen::Matrix<double, 9, 1> b = sh_basis(normal);
    const Eigen::Matrix<double, 9, 3> g = sh_basis_gradient(normal);
    ShadeResult out;
    const Eigen::Vector3d irradiance = sh_coeffs.transpose() * b;
    out.pre_clamp = albedo.cwiseProduct(irradiance);
    for (int c = 0; c < 3; ++c) {
        const bool clamped = out.pre_clamp[c] < 0.0 || out.pre_clamp[c] > 1.0;
        out.rgb[c] = std::clamp(out.pre_clamp[c], 0.0, 1.0);
        if (clamped) {
            out.d_normal.row(c).setZero();
            out.d_albedo[c] = 0.0;
        } else {
            out.d_normal.row(c) = albedo[c] * (sh_coeffs.col(c).transpose() * g);
            out.d_albedo[c] = irradiance[c];
        }
    }
    return out;
}

} // namespace facefit
