/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/rasterizer.h
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

#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "facefit/camera.h"
#include "facefit/image.h"
#include "facefit/rig.h"
#include "facefit/shading.h"

namespace facefit {

/**
 * Optional fiducial layer: small colored disks splatted (differentiably) at
 * the projected landmark vertices after shading. The reference landmark
 * backend localizes these disks, so both synthetic plates and solver-side
 * renders carry them. Each disk has a constant-alpha core and a smoothstep
 * rim over the outer quarter of `radius`; C^1 and exactly zero beyond it.
 */
struct FiducialConfig
{
    std::vector<int> vertex_indices;
    std::vector<Eigen::Vector3d> colors;
    double radius = 4.0;
    double peak_alpha = 0.95;
    /// A landmark is splatted only if its vertex depth is within this
    /// relative tolerance of the z-buffer at its projected pixel.
    double depth_tolerance = 0.02;
};

struct RenderOptions
{
    Eigen::Vector3d background{0.5, 0.5, 0.5};
    double near_plane = 1e-4;
    std::optional<FiducialConfig> fiducials;
};

struct FiducialSplat
{
    int landmark = -1;
    int vertex = -1;
    bool visible = false;
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    Eigen::Matrix<double, 2, 3> center_jacobian = Eigen::Matrix<double, 2, 3>::Zero();
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

struct RenderResult
{
    Image image;          // final image, fiducials composited
    Image base_image;     // shaded image before the fiducial layer
    Eigen::ArrayXXi triangle_id; // H x W, -1 where background
    Image barycentric;    // H x W x 3
    Eigen::ArrayXXd depth;       // H x W camera-space z, +inf where background
    std::vector<uint8_t> boundary; // H*W; 1 where the triangle id differs from a 4-neighbor
    std::vector<FiducialSplat> splats; // frozen fiducial state, in composite order
    RenderOptions options;

    bool covered(int y, int x) const { return triangle_id(y, x) >= 0; }
    bool is_boundary(int y, int x) const
    {
        return boundary[static_cast<size_t>(y) * image.width() + x] != 0;
    }
};

/// Z-buffered rasterization of the surface with barycentric interpolation of
/// albedo and smooth (area-weighted) vertex normals, shaded per pixel via the
/// SH model. Deterministic: fixed triangle order, ties keep the earlier
/// triangle.
RenderResult rasterize(const Camera& camera, const MeshSurface& surface,
                       const AppearanceModel& appearance, const RenderOptions& options = {});

/**
 * Sparse Jacobian of the rendered image w.r.t. the posed vertex positions.
 * Row (y * W + x) * 3 + c, column 3 * v + axis. Rows exist only for covered
 * or fiducial-touched pixels. Occlusion-boundary pixels get the same
 * screen-space appearance derivative as interior pixels; silhouette-motion
 * terms are not modeled, so gradient checks must exclude boundary pixels.
 */
Eigen::SparseMatrix<double, Eigen::RowMajor> render_jacobian(const RenderResult& result,
                                                             const Camera& camera,
                                                             const MeshSurface& surface,
                                                             const AppearanceModel& appearance);

} // namespace facefit
