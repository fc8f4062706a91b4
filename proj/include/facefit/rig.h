/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/rig.h
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
#include <string>
#include <vector>

#include <Eigen/Core>

#include "facefit/common.h"

namespace facefit {

constexpr int kNumLandmarks = 68;

/// Semantic grouping of blendshape parameters; stage schedules select
/// parameter subsets by tag.
enum class ShapeTag { Jaw, Mouth, Other };

/// What a weight entry drives. Delta entries scale a per-vertex offset
/// field; the six Jaw* entries are the degrees of freedom of the jaw joint
/// (rotations about the joint axes and translations along them).
enum class ShapeKind { Delta, JawRx, JawRy, JawRz, JawTx, JawTy, JawTz };

inline bool is_jaw_dof(ShapeKind k) { return k != ShapeKind::Delta; }

/// Landmark semantics: the jaw contour, the mouth/lip set, and the rest.
enum class LandmarkGroup { Jaw, Mouth, Other };

struct BlendShape
{
    std::string name;
    ShapeTag tag = ShapeTag::Other;
    ShapeKind kind = ShapeKind::Delta;
    /// Physical units per unit weight for jaw DOF entries (radians for
    /// rotations, model units for translations). Unused for delta shapes.
    double scale = 1.0;
    /// 3 x nverts per-vertex offsets; only for ShapeKind::Delta.
    Eigen::Matrix3Xd deltas;
};

struct JawJoint
{
    Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
    /// Columns are the joint's local axes expressed in model space.
    Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
};

/**
 * The face model: a neutral triangulated surface, delta blendshapes, a
 * six-DOF jaw joint blended by per-vertex skin weights, and the 68 landmark
 * vertex assignments. Immutable after load; all evaluation is functional.
 */
struct FaceRig
{
    Eigen::Matrix3Xd neutral_vertices; // 3 x n
    Eigen::Matrix3Xi triangles;        // 3 x m vertex indices
    std::vector<BlendShape> shapes;
    JawJoint jaw_joint;
    Eigen::VectorXd jaw_skin_weights; // n entries in [0, 1]
    std::array<int, kNumLandmarks> landmark_vertices{};
    std::array<LandmarkGroup, kNumLandmarks> landmark_groups{};

    int vertex_count() const { return static_cast<int>(neutral_vertices.cols()); }
    int triangle_count() const { return static_cast<int>(triangles.cols()); }
    int shape_count() const { return static_cast<int>(shapes.size()); }
    /// Length of the full optimization vector p = [theta, t, w].
    int param_count() const { return 6 + shape_count(); }

    /// Index into `shapes` of the unique entry with the given jaw DOF kind,
    /// or -1 when the rig has no jaw.
    int jaw_slot(ShapeKind kind) const;
    bool has_jaw() const;

    std::vector<int> shape_indices_by_tag(ShapeTag tag) const;
    int shape_index_by_name(const std::string& name) const; // -1 if absent

    /// Distance between the two outer eye-corner landmarks (36 and 45) on
    /// the neutral surface; the scale reference for translation errors.
    double interocular_distance() const;

    /// Checks every structural invariant (index ranges, weight bounds,
    /// jaw slot uniqueness, landmark count); throws FaceFitError on violation.
    void validate() const;
};

/// Rigid pose plus blendshape weights; the full optimization vector is
/// p = [theta(3), t(3), w(nshapes)]. Euler angles use the intrinsic X-Y-Z
/// composition R = Rx(theta0) * Ry(theta1) * Rz(theta2), in radians.
struct PoseParams
{
    Eigen::Vector3d theta = Eigen::Vector3d::Zero();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    Eigen::VectorXd w;

    static PoseParams zero(const FaceRig& rig)
    {
        PoseParams p;
        p.w = Eigen::VectorXd::Zero(rig.shape_count());
        return p;
    }

    Eigen::VectorXd to_vector() const;
    static PoseParams from_vector(const Eigen::VectorXd& v);
};

/// A deformed copy of the rig surface; topology lives on the rig.
struct MeshSurface
{
    Eigen::Matrix3Xd vertices;
    const FaceRig* rig = nullptr;

    int vertex_count() const { return static_cast<int>(vertices.cols()); }
};

} // namespace facefit
