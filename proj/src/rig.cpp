/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/rig.cpp
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
#include "facefit/rig.h"

#include <cmath>
#include <set>

namespace facefit {

int FaceRig::jaw_slot(ShapeKind kind) const
{
    for (int i = 0; i < shape_count(); ++i)
        if (shapes[i].kind == kind)
            return i;
    return -1;
}

bool FaceRig::has_jaw() const { return jaw_slot(ShapeKind::JawRx) >= 0; }

std::vector<int> FaceRig::shape_indices_by_tag(ShapeTag tag) const
{
    std::vector<int> out;
    for (int i = 0; i < shape_count(); ++i)
        if (shapes[i].tag == tag)
            out.push_back(i);
    return out;
}

int FaceRig::shape_index_by_name(const std::string& name) const
{
    for (int i = 0; i < shape_count(); ++i)
        if (shapes[i].name == name)
            return i;
    return -1;
}

double FaceRig::interocular_distance() const
{
    const Eigen::Vector3d a = neutral_vertices.col(landmark_vertices[36]);
    const Eigen::Vector3d b = neutral_vertices.col(landmark_vertices[45]);
    return (a - b).norm();
}

void FaceRig::validate() const
{
    const int n = vertex_count();
    if (n == 0)
        throw FaceFitError("rig has no vertices");
    for (int f = 0; f < triangle_count(); ++f)
        for (int k = 0; k < 3; ++k)
            if (triangles(k, f) < 0 || triangles(k, f) >= n)
                throw FaceFitError("triangle index out of range");
    if (jaw_skin_weights.size() != n)
        throw FaceFitError("jaw skin weight count does not match vertex count");
    for (int i = 0; i < n; ++i) {
        const double s = jaw_skin_weights[i];
        if (!(s >= 0.0 && s <= 1.0))
            throw FaceFitError("jaw skin weight outside [0, 1]");
    }
    std::set<std::string> names;
    int jaw_kinds[6] = {0, 0, 0, 0, 0, 0};
    for (const BlendShape& s : shapes) {
        if (s.name.empty())
            throw FaceFitError("blendshape with empty name");
        if (!names.insert(s.name).second)
            throw FaceFitError("duplicate blendshape name: " + s.name);
        if (s.kind == ShapeKind::Delta) {
            if (s.deltas.cols() != n)
                throw FaceFitError("delta count mismatch in shape " + s.name);
        } else {
            ++jaw_kinds[static_cast<int>(s.kind) - 1];
            if (!(s.scale > 0.0) || !std::isfinite(s.scale))
                throw FaceFitError("jaw DOF scale must be positive: " + s.name);
        }
    }
    const bool any_jaw = jaw_kinds[0] + jaw_kinds[1] + jaw_kinds[2] + jaw_kinds[3] + jaw_kinds[4] + jaw_kinds[5] > 0;
    if (any_jaw) {
        for (int k = 0; k < 6; ++k)
            if (jaw_kinds[k] != 1)
                throw FaceFitError("a rig with a jaw must have exactly one shape per jaw DOF");
    }
    for (int i = 0; i < kNumLandmarks; ++i)
        if (landmark_vertices[i] < 0 || landmark_vertices[i] >= n)
            throw FaceFitError("landmark vertex index out of range");
}

Eigen::VectorXd PoseParams::to_vector() const
{
    Eigen::VectorXd v(6 + w.size());
    v.segment<3>(0) = theta;
    v.segment<3>(3) = t;
    v.tail(w.size()) = w;
    return v;
}

PoseParams PoseParams::from_vector(const Eigen::VectorXd& v)
{
    PoseParams p;
    p.theta = v.segment<3>(0);
    p.t = v.segment<3>(3);
    p.w = v.tail(v.size() - 6);
    return p;
}

} // namespace facefit
