/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/camera.h
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

#include <string>

#include <Eigen/Core>

#include "facefit/common.h"

namespace facefit {

/// Calibrated pinhole camera. Extrinsics map world to camera coordinates
/// (camera looks down +z, image x right, image y down). Pixel coordinates
/// follow the library's index convention (pixel i at coordinate i).
struct Camera
{
    std::string name = "cam";
    int width = 0;
    int height = 0;
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const
    {
        return rotation * world + translation;
    }

    void validate() const
    {
        if (width <= 0 || height <= 0)
            throw FaceFitError("camera image size must be positive");
        if (!(fx > 0.0) || !(fy > 0.0))
            throw FaceFitError("camera focal lengths must be positive");
    }
};

struct Projection
{
    bool valid = false;              // false when behind the near plane
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
    double depth = 0.0;              // camera-space z
    Eigen::Matrix<double, 2, 3> jacobian = Eigen::Matrix<double, 2, 3>::Zero(); // d pixel / d world point
};

/// Perspective projection with its analytic 2x3 derivative w.r.t. the world
/// point. Points with camera depth <= near_plane are flagged invalid.
Projection project(const Camera& camera, const Eigen::Vector3d& world_point, double near_plane = 1e-6);

} // namespace facefit
