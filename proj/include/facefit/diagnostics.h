/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/diagnostics.h
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
#include <vector>

#include "facefit/pipeline.h"

namespace facefit {

/// One row per frame per stage in the diagnostics CSV.
void write_diagnostics_csv(const std::string& path, const std::vector<StageReport>& reports);

/// Per-frame error summary against ground truth.
struct FrameErrors
{
    int frame = 0;
    Eigen::Vector3d euler_error_deg = Eigen::Vector3d::Zero();
    double rotation_angle_deg = 0.0; // geodesic angle of R_est^T R_gt
    Eigen::Vector3d t_error = Eigen::Vector3d::Zero();
    double t_error_norm = 0.0;
    double depth_error = 0.0; // along the reference camera's optical axis
    double landmark_error_px = 0.0; // mean reprojection error of the landmark vertices
};

FrameErrors compute_frame_errors(const FaceRig& rig, const Camera& camera, int frame_index,
                                 const PoseParams& estimate, const PoseParams& ground_truth);

void write_report_csv(const std::string& path, const std::vector<FrameErrors>& errors);

/// Mean reprojection distance (px) of the posed landmark vertices between
/// two parameter sets; the scalar used by the infill/smoothing comparisons.
double landmark_reprojection_error(const FaceRig& rig, const Camera& camera,
                                   const PoseParams& estimate, const PoseParams& ground_truth);

} // namespace facefit
