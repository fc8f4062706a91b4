/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/diagnostics.cpp
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
#include "facefit/diagnostics.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "facefit/face_model.h"

namespace facefit {

void write_diagnostics_csv(const std::string& path, const std::vector<StageReport>& reports)
{
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream f(path);
    if (!f)
        throw FaceFitError("cannot write diagnostics csv: " + path);
    f << "frame,stage,iterations,accepted_steps,initial_residual,final_residual,reason,time_ms\n";
    f.precision(17);
    for (const StageReport& r : reports) {
        f << r.frame << ',' << r.stage << ',' << r.report.iterations << ',' << r.report.accepted_steps
          << ',' << r.report.initial_residual() << ',' << r.report.final_residual() << ','
          << to_string(r.report.reason) << ',' << r.time_ms << '\n';
    }
}

double landmark_reprojection_error(const FaceRig& rig, const Camera& camera,
                                   const PoseParams& estimate, const PoseParams& ground_truth)
{
    const MeshSurface est = apply_rigid(evaluate_surface(rig, estimate.w), estimate.theta, estimate.t);
    const MeshSurface ref =
        apply_rigid(evaluate_surface(rig, ground_truth.w), ground_truth.theta, ground_truth.t);
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < kNumLandmarks; ++i) {
        const int v = rig.landmark_vertices[i];
        const Projection pe = project(camera, est.vertices.col(v));
        const Projection pr = project(camera, ref.vertices.col(v));
        if (!pe.valid || !pr.valid)
            continue;
        sum += (pe.pixel - pr.pixel).norm();
        ++count;
    }
    if (count == 0)
        throw FaceFitError("landmark_reprojection_error: no valid projections");
    return sum / count;
}

FrameErrors compute_frame_errors(const FaceRig& rig, const Camera& camera, int frame_index,
                                 const PoseParams& estimate, const PoseParams& ground_truth)
{
    FrameErrors e;
    e.frame = frame_index;
    for (int k = 0; k < 3; ++k) {
        double d = estimate.theta[k] - ground_truth.theta[k];
        d = std::remainder(d, 2.0 * M_PI);
        e.euler_error_deg[k] = std::abs(d) * 180.0 / M_PI;
    }
    const Eigen::Matrix3d R_rel = euler_to_rotation(estimate.theta).R.transpose() *
                                  euler_to_rotation(ground_truth.theta).R;
    e.rotation_angle_deg =
        std::acos(std::clamp((R_rel.trace() - 1.0) / 2.0, -1.0, 1.0)) * 180.0 / M_PI;
    e.t_error = estimate.t - ground_truth.t;
    e.t_error_norm = e.t_error.norm();
    e.depth_error = std::abs((camera.rotation * e.t_error).z());
    e.landmark_error_px = landmark_reprojection_error(rig, camera, estimate, ground_truth);
    return e;
}

void write_report_csv(const std::string& path, const std::vector<FrameErrors>& errors)
{
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream f(path);
    if (!f)
        throw FaceFitError("cannot write report csv: " + path);
    f << "frame,euler_x_deg,euler_y_deg,euler_z_deg,rotation_angle_deg,"
         "t_err_x,t_err_y,t_err_z,t_err_norm,depth_err,landmark_err_px\n";
    f.precision(17);
    for (const FrameErrors& e : errors) {
        f << e.frame << ',' << e.euler_error_deg[0] << ',' << e.euler_error_deg[1] << ','
          << e.euler_error_deg[2] << ',' << e.rotation_angle_deg << ',' << e.t_error[0] << ','
          << e.t_error[1] << ',' << e.t_error[2] << ',' << e.t_error_norm << ',' << e.depth_error
          << ',' << e.landmark_error_px << '\n';
    }
}

} // namespace facefit
