/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/shading.h
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

#include <Eigen/Core>

#include "facefit/common.h"

namespace facefit {

/// Per-vertex RGB albedo plus a 9-coefficient spherical-harmonics light per
/// color channel.
struct AppearanceModel
{
    Eigen::Matrix3Xd albedo;                 // 3 x nverts, in [0, 1]
    Eigen::Matrix<double, 9, 3> sh_coeffs = Eigen::Matrix<double, 9, 3>::Zero();

    static AppearanceModel constant(int nverts, const Eigen::Vector3d& albedo_rgb,
                                    double ambient = 1.0 / 0.28209479177387814);
    void validate(int nverts) const;
};

/// Real SH basis of order 2 evaluated on a unit direction, in the order
/// [1, y, z, x, xy, yz, 3z^2-1, xz, x^2-y^2] with the usual constants.
Eigen::Matrix<double, 9, 1> sh_basis(const Eigen::Vector3d& n);

/// d basis_k / d n_j (9 x 3).
Eigen::Matrix<double, 9, 3> sh_basis_gradient(const Eigen::Vector3d& n);

struct ShadeResult
{
    Eigen::Vector3d rgb;                 // clamped to [0, 1]
    Eigen::Vector3d pre_clamp;
    Eigen::Matrix3d d_normal;            // d rgb / d normal (zero rows where clamped)
    Eigen::Vector3d d_albedo;            // diagonal of d rgb / d albedo
};

/// Irradiance from the SH light on `normal` (unit length), multiplied by the
/// albedo, clamped to [0, 1]. Derivatives are exact for the clamped output.
ShadeResult shade(const Eigen::Vector3d& normal, const Eigen::Vector3d& albedo,
                  const Eigen::Matrix<double, 9, 3>& sh_coeffs);

} // namespace facefit
