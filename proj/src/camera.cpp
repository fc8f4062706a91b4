/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/camera.cpp
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
#include "facefit/camera.h"

namespace facefit {

Projection project(const Camera& camera, const Eigen::Vector3d& world_point, double near_plane)
{
    Projection out;
    const Eigen::Vector3d p = camera.to_camera(world_point);
    out.depth = p.z();
    if (!(p.z() > near_plane))
        return out;
    out.valid = true;
    const double inv_z = 1.0 / p.z();
    out.pixel = {camera.fx * p.x() * inv_z + camera.cx, camera.fy * p.y() * inv_z + camera.cy};
    Eigen::Matrix<double, 2, 3> d_cam;
    d_cam << camera.fx * inv_z, 0.0, -camera.fx * p.x() * inv_z * inv_z,
             0.0, camera.fy * inv_z, -camera.fy * p.y() * inv_z * inv_z;
    out.jacobian = d_cam * camera.rotation;
    return out;
}

} // namespace facefit
