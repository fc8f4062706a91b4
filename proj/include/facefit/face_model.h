/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/face_model.h
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

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include "facefit/rig.h"

namespace facefit {

/// Rotation matrix with its analytic partials w.r.t. each Euler angle.
struct RotationWithDerivatives
{
    Eigen::Matrix3d R;
    std::array<Eigen::Matrix3d, 3> dR;
};

/// Intrinsic X-Y-Z Euler angles to rotation: R = Rx(a0) * Ry(a1) * Rz(a2).
RotationWithDerivatives euler_to_rotation(const Eigen::Vector3d& theta);

/// Principal-branch factorization of R back to intrinsic X-Y-Z angles.
Eigen::Vector3d rotation_to_euler(const Eigen::Matrix3d& R);

/// Euler factorization choosing, among the two solution branches and their
/// 2*pi shifts, the angles closest (L1) to `reference`. Keeps smoothed
/// rotation trajectories free of branch jumps.
Eigen::Vector3d rotation_to_euler_near(const Eigen::Matrix3d& R, const Eigen::Vector3d& reference);

Eigen::Quaterniond euler_to_quaternion(const Eigen::Vector3d& theta);
Eigen::Vector3d quaternion_to_euler_near(const Eigen::Quaterniond& q, const Eigen::Vector3d& reference);

/// Evaluates x(w): the neutral surface plus weighted delta shapes, blended
/// per vertex with the rigid jaw-joint transform driven by the six jaw DOF
/// entries of w (linear blend skinning with two bones, head = identity).
MeshSurface evaluate_surface(const FaceRig& rig, const Eigen::VectorXd& w);

/// Applies the rigid frame: every vertex becomes R(theta) * v + t.
MeshSurface apply_rigid(const MeshSurface& surface, const Eigen::Vector3d& theta, const Eigen::Vector3d& t);

/// Analytic Jacobian of the posed surface w.r.t. the full parameter vector.
/// Rows are stacked vertex coordinates (3 * v + axis), columns follow the
/// p = [theta, t, w] layout. Row-major so energy assembly can walk the rows
/// touched by a sparse vertex cotangent.
Eigen::SparseMatrix<double, Eigen::RowMajor> pose_jacobian(const FaceRig& rig, const PoseParams& params);

} // namespace facefit
