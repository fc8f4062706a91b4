/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/pipeline.h
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

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "facefit/appearance_fit.h"
#include "facefit/camera.h"
#include "facefit/dogleg.h"
#include "facefit/energy.h"
#include "facefit/face_model.h"
#include "facefit/feature_backend.h"
#include "facefit/flow.h"
#include "facefit/rasterizer.h"

namespace facefit {

enum class WeightPreset { Uniform, MouthHeavy };

/// One stage of the schedule: which parameters move, which landmarks and
/// weights drive them, which energies are stacked, and the solver budget.
struct StageSpec
{
    std::string name;
    bool solve_theta = false;
    bool solve_t = false;
    /// Blendshape selectors: "tag:jaw", "tag:mouth", "tag:other",
    /// "kind:jaw_rx" (the jaw-open DOF), or "name:<shape>".
    std::vector<std::string> shape_selectors;
    LandmarkSubset subset = LandmarkSubset::All;
    WeightPreset weights = WeightPreset::Uniform;
    double landmark_weight = 1.0;
    double edge_weight = 1.0;
    double reg_lambda = 0.0; // L2 blendshape regularizer, 0 disables
    bool tether_rigid = false; // deviation prior on theta/t toward stage entry
    double prior_theta = 20.0;
    double prior_t = 200.0;
    SolveOptions solver;

    ParamMask build_mask(const FaceRig& rig) const;
};

/// The staged rigid schedule: translation-only on non-jaw landmarks, then
/// theta+t on non-jaw, jaw-only, and all landmarks.
std::vector<StageSpec> default_rigid_stages();

/// The staged expression schedule: jaw-open with rigid refinement under
/// mouth-heavy weights, all jaw DOFs, then jaw+mouth shapes with uniform
/// weights; all stages carry the lambda = 100 weight regularizer.
std::vector<StageSpec> default_expression_stages();

/// Mouth+jaw re-estimation with the rigid parameters frozen.
StageSpec default_reestimation_stage();

enum class SmoothingMode { Averaging, SelfFlow, PlateFlow, Hybrid };

struct SmoothingConfig
{
    SmoothingMode mode = SmoothingMode::Hybrid;
    std::array<double, 3> window{0.25, 0.5, 0.25};
    int sweeps = 1;
    double prior_weight = 1.0; // deviation prior in the flow modes
    bool gauss_seidel = false; // consume already-updated neighbors
    SolveOptions solver = [] {
        SolveOptions o;
        o.max_iterations = 8;
        return o;
    }();

    void validate() const;
};

struct InfillConfig
{
    int sweeps = 2; // forward, then backward, alternating
    double prior_weight = 0.0;
    SolveOptions solver = [] {
        SolveOptions o;
        o.max_iterations = 12;
        return o;
    }();
};

struct FiducialSettings
{
    double radius = 4.0;
    double peak_alpha = 0.95;
};

/// Everything a solve run needs besides the data: backend settings, energy
/// schedules, temporal configuration.
struct SolveConfig
{
    std::string landmark_backend = "blob";
    BlobBackendOptions blob;
    DetectOptions detect = [] {
        DetectOptions d;
        d.min_peak = 0.04; // blob-backend peaks sit near 0.08; keep headroom
        return d;
    }();
    DetectBboxOptions bbox;
    std::string flow_backend = "variational";
    VariationalFlowOptions flow;
    FiducialSettings fiducials;
    double mouth_weight_factor = 10.0;
    int flow_mask_dilation = 5;
    std::vector<StageSpec> rigid_stages = default_rigid_stages();
    std::vector<StageSpec> expression_stages = default_expression_stages();
    StageSpec reestimation_stage = default_reestimation_stage();
    SmoothingConfig smoothing;
    InfillConfig infill;
    Eigen::Vector3d background{0.5, 0.5, 0.5};
    std::uint64_t seed = 1;
};

enum class FrameStatus { Unsolved, Solved, DetectorFailed, Infilled, Smoothed };

const char* to_string(FrameStatus status);
FrameStatus frame_status_from_string(const std::string& s);

struct FrameState
{
    int index = 0;
    std::vector<Image> images; // one per camera
    std::vector<std::optional<BoundingBox>> bbox_overrides;
    PoseParams params;
    FrameStatus status = FrameStatus::Unsolved;
};

struct StageReport
{
    int frame = 0;
    std::string stage;
    SolveReport report;
    double time_ms = 0.0;
};

/**
 * Shared immutable state of a solve run plus caches for captured-side
 * quantities (landmark extractions, plate flow fields) that never depend on
 * the parameters being optimized.
 */
class PipelineContext
{
public:
    PipelineContext(const FaceRig* rig, std::vector<Camera> cameras, AppearanceModel appearance,
                    SolveConfig config);

    const FaceRig& rig() const { return *rig_; }
    const std::vector<Camera>& cameras() const { return cameras_; }
    const AppearanceModel& appearance() const { return appearance_; }
    const SolveConfig& config() const { return config_; }
    const FeatureBackend& feature_backend() const { return *feature_backend_; }
    const FlowBackend& flow_backend() const { return *flow_backend_; }
    const std::vector<Eigen::Vector3d>& palette() const { return palette_; }

    RenderOptions render_options() const;
    DetectBboxOptions bbox_options() const;

    const LandmarkExtraction& captured_extraction(const FrameState& frame, int camera);
    const FlowField& plate_flow(const FrameState& from, const FrameState& to, int camera);
    void clear_caches();

private:
    const FaceRig* rig_;
    std::vector<Camera> cameras_;
    AppearanceModel appearance_;
    SolveConfig config_;
    std::vector<Eigen::Vector3d> palette_;
    std::unique_ptr<FeatureBackend> feature_backend_;
    std::unique_ptr<FlowBackend> flow_backend_;
    std::map<std::pair<int, int>, LandmarkExtraction> extraction_cache_;
    std::map<std::tuple<int, int, int>, FlowField> flow_cache_;
};

/// Runs one landmark-energy stage on a frame; the frame's parameters are
/// updated to the solver output (only masked entries change).
StageReport run_stage(PipelineContext& ctx, FrameState& frame, const StageSpec& stage);

/// Staged rigid alignment (theta, t). Throws DetectionFailed when the
/// captured-side detector fails; callers mark the frame and move on.
std::vector<StageReport> solve_rigid(PipelineContext& ctx, FrameState& frame);

/// Staged jaw/mouth expression estimation after rigid alignment.
std::vector<StageReport> solve_expression(PipelineContext& ctx, FrameState& frame);

/// Rigid + expression; sets the frame status to Solved or DetectorFailed.
std::vector<StageReport> solve_frame(PipelineContext& ctx, FrameState& frame);

/**
 * Optical-flow infill of failed frames: each run of failed frames bracketed
 * by solved anchors is swept from the earlier anchor, then from the later
 * one, `config.infill.sweeps` times total, solving each frame against the
 * captured-image flow. Runs touching a sequence boundary get one-sided
 * sweeps only.
 */
std::vector<StageReport> infill(PipelineContext& ctx, std::vector<FrameState>& sequence,
                                const std::vector<int>& failed_indices);

/// Temporal refinement in the configured mode. Averaging takes a weighted
/// three-frame window per frame (quaternion averaging for the rotations);
/// the flow modes re-solve each frame against adjacent-frame flow fields in
/// parallel Jacobi sweeps; hybrid runs one averaging pass then flow sweeps.
std::vector<StageReport> smooth(PipelineContext& ctx, std::vector<FrameState>& sequence,
                                const SmoothingConfig& config);

/// Per-frame mouth/jaw re-estimation with rigid parameters frozen.
std::vector<StageReport> reestimate_expression(PipelineContext& ctx, std::vector<FrameState>& sequence);

/// Weighted rotation average: the maximal eigenvector of sum w_i q_i q_i^T,
/// sign-canonicalized to a non-negative scalar part. Throws DegenerateInput
/// when the top eigenvalue is not isolated.
Eigen::Quaterniond quaternion_average(const std::vector<Eigen::Quaterniond>& quats,
                                      const Eigen::VectorXd& weights);

} // namespace facefit
