/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/pipeline.cpp
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
#include "facefit/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <Eigen/Dense>

namespace facefit {

namespace {

double elapsed_ms(const std::chrono::steady_clock::time_point& t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

ShapeTag parse_tag(const std::string& s)
{
    if (s == "jaw")
        return ShapeTag::Jaw;
    if (s == "mouth")
        return ShapeTag::Mouth;
    if (s == "other")
        return ShapeTag::Other;
    throw FaceFitError("unknown shape tag: " + s);
}

ShapeKind parse_kind(const std::string& s)
{
    if (s == "jaw_rx") return ShapeKind::JawRx;
    if (s == "jaw_ry") return ShapeKind::JawRy;
    if (s == "jaw_rz") return ShapeKind::JawRz;
    if (s == "jaw_tx") return ShapeKind::JawTx;
    if (s == "jaw_ty") return ShapeKind::JawTy;
    if (s == "jaw_tz") return ShapeKind::JawTz;
    throw FaceFitError("unknown shape kind: " + s);
}

SolveOptions capped(int max_iterations)
{
    SolveOptions o;
    o.max_iterations = max_iterations;
    return o;
}

} // namespace

ParamMask StageSpec::build_mask(const FaceRig& rig) const
{
    ParamMask mask = ParamMask::none(rig.param_count());
    if (solve_theta)
        for (int i = 0; i < 3; ++i)
            mask.active[i] = 1;
    if (solve_t)
        for (int i = 3; i < 6; ++i)
            mask.active[i] = 1;
    for (const std::string& sel : shape_selectors) {
        const auto colon = sel.find(':');
        if (colon == std::string::npos)
            throw FaceFitError("bad shape selector: " + sel);
        const std::string kind = sel.substr(0, colon);
        const std::string arg = sel.substr(colon + 1);
        if (kind == "tag") {
            for (int i : rig.shape_indices_by_tag(parse_tag(arg)))
                mask.active[6 + i] = 1;
        } else if (kind == "kind") {
            const int slot = rig.jaw_slot(parse_kind(arg));
            if (slot < 0)
                throw FaceFitError("rig has no jaw DOF for selector " + sel);
            mask.active[6 + slot] = 1;
        } else if (kind == "name") {
            const int idx = rig.shape_index_by_name(arg);
            if (idx < 0)
                throw FaceFitError("rig has no shape named " + arg);
            mask.active[6 + idx] = 1;
        } else {
            throw FaceFitError("bad shape selector: " + sel);
        }
    }
    mask.validate();
    return mask;
}

std::vector<StageSpec> default_rigid_stages()
{
    std::vector<StageSpec> stages(4);
    stages[0].name = "rigid_translate";
    stages[0].solve_t = true;
    stages[0].subset = LandmarkSubset::NonJaw;
    stages[0].solver = capped(10);
    stages[1].name = "rigid_nonjaw";
    stages[1].solve_theta = stages[1].solve_t = true;
    stages[1].subset = LandmarkSubset::NonJaw;
    stages[1].solver = capped(20);
    stages[2].name = "rigid_jaw";
    stages[2].solve_theta = stages[2].solve_t = true;
    stages[2].subset = LandmarkSubset::JawOnly;
    stages[2].solver = capped(20);
    stages[3].name = "rigid_all";
    stages[3].solve_theta = stages[3].solve_t = true;
    stages[3].subset = LandmarkSubset::All;
    stages[3].solver = capped(20);
    return stages;
}

std::vector<StageSpec> default_expression_stages()
{
    std::vector<StageSpec> stages(3);
    stages[0].name = "expr_jaw_open";
    stages[0].solve_theta = stages[0].solve_t = true;
    stages[0].tether_rigid = true;
    stages[0].shape_selectors = {"kind:jaw_rx"};
    stages[0].weights = WeightPreset::MouthHeavy;
    stages[0].reg_lambda = 100.0;
    stages[0].solver = capped(30);
    stages[1].name = "expr_jaw";
    stages[1].solve_theta = stages[1].solve_t = true;
    stages[1].tether_rigid = true;
    stages[1].shape_selectors = {"tag:jaw"};
    stages[1].weights = WeightPreset::MouthHeavy;
    stages[1].reg_lambda = 100.0;
    stages[1].solver = capped(30);
    stages[2].name = "expr_jaw_mouth";
    stages[2].solve_theta = stages[2].solve_t = true;
    stages[2].tether_rigid = true;
    stages[2].shape_selectors = {"tag:jaw", "tag:mouth"};
    stages[2].weights = WeightPreset::Uniform;
    stages[2].reg_lambda = 100.0;
    stages[2].solver = capped(30);
    return stages;
}

StageSpec default_reestimation_stage()
{
    StageSpec s;
    s.name = "reestimate";
    s.shape_selectors = {"tag:jaw", "tag:mouth"};
    s.reg_lambda = 100.0;
    s.solver = capped(30);
    return s;
}

void SmoothingConfig::validate() const
{
    if (sweeps < 1)
        throw FaceFitError("smoothing sweep count must be >= 1");
    if (!(window[0] > 0.0 && window[1] > 0.0 && window[2] > 0.0))
        throw FaceFitError("smoothing window weights must be positive");
    if (!(window[1] >= window[0] && window[1] >= window[2]))
        throw FaceFitError("smoothing center weight must be the largest");
}

const char* to_string(FrameStatus status)
{
    switch (status) {
    case FrameStatus::Unsolved: return "unsolved";
    case FrameStatus::Solved: return "solved";
    case FrameStatus::DetectorFailed: return "detector_failed";
    case FrameStatus::Infilled: return "infilled";
    case FrameStatus::Smoothed: return "smoothed";
    }
    return "unknown";
}

FrameStatus frame_status_from_string(const std::string& s)
{
    if (s == "unsolved") return FrameStatus::Unsolved;
    if (s == "solved") return FrameStatus::Solved;
    if (s == "detector_failed") return FrameStatus::DetectorFailed;
    if (s == "infilled") return FrameStatus::Infilled;
    if (s == "smoothed") return FrameStatus::Smoothed;
    throw FaceFitError("unknown frame status: " + s);
}

PipelineContext::PipelineContext(const FaceRig* rig, std::vector<Camera> cameras,
                                 AppearanceModel appearance, SolveConfig config)
    : rig_(rig), cameras_(std::move(cameras)), appearance_(std::move(appearance)),
      config_(std::move(config))
{
    rig_->validate();
    appearance_.validate(rig_->vertex_count());
    for (const Camera& c : cameras_)
        c.validate();
    palette_ = fiducial_palette(kNumLandmarks);
    if (config_.landmark_backend == "blob")
        feature_backend_ = std::make_unique<BlobFeatureBackend>(palette_, config_.blob);
    else
        throw FaceFitError("unknown landmark backend: " + config_.landmark_backend);
    if (config_.flow_backend == "variational")
        flow_backend_ = std::make_unique<VariationalFlowBackend>(config_.flow);
    else
        throw FaceFitError("unknown flow backend: " + config_.flow_backend);
}

RenderOptions PipelineContext::render_options() const
{
    RenderOptions opt;
    opt.background = config_.background;
    FiducialConfig fc;
    fc.vertex_indices.assign(rig_->landmark_vertices.begin(), rig_->landmark_vertices.end());
    fc.colors = palette_;
    fc.radius = config_.fiducials.radius;
    fc.peak_alpha = config_.fiducials.peak_alpha;
    opt.fiducials = fc;
    return opt;
}

DetectBboxOptions PipelineContext::bbox_options() const
{
    DetectBboxOptions opt = config_.bbox;
    opt.background = config_.background;
    return opt;
}

const LandmarkExtraction& PipelineContext::captured_extraction(const FrameState& frame, int camera)
{
    const auto key = std::make_pair(frame.index, camera);
    auto it = extraction_cache_.find(key);
    if (it != extraction_cache_.end())
        return it->second;
    const Image& plate = frame.images.at(camera);
    BoundingBox bbox;
    if (camera < static_cast<int>(frame.bbox_overrides.size()) && frame.bbox_overrides[camera])
        bbox = *frame.bbox_overrides[camera];
    else
        bbox = detect_bbox(plate, bbox_options());
    LandmarkExtraction ex = extract_landmarks(*feature_backend_, plate, bbox, config_.detect);
    return extraction_cache_.emplace(key, std::move(ex)).first->second;
}

const FlowField& PipelineContext::plate_flow(const FrameState& from, const FrameState& to, int camera)
{
    const auto key = std::make_tuple(from.index, to.index, camera);
    auto it = flow_cache_.find(key);
    if (it != flow_cache_.end())
        return it->second;
    FlowField f = flow_backend_->flow(from.images.at(camera), to.images.at(camera));
    return flow_cache_.emplace(key, std::move(f)).first->second;
}

void PipelineContext::clear_caches()
{
    extraction_cache_.clear();
    flow_cache_.clear();
}

StageReport run_stage(PipelineContext& ctx, FrameState& frame, const StageSpec& stage)
{
    const auto t0 = std::chrono::steady_clock::now();
    const FaceRig& rig = ctx.rig();
    const ParamMask mask = stage.build_mask(rig);
    const Eigen::VectorXd p_entry = frame.params.to_vector();
    const std::array<bool, kNumLandmarks> selection = landmark_subset_mask(rig, stage.subset);
    const LandmarkWeights W = stage.weights == WeightPreset::MouthHeavy
                                  ? LandmarkWeights::mouth_heavy(rig, ctx.config().mouth_weight_factor)
                                  : LandmarkWeights::uniform();

    const int ncams = static_cast<int>(ctx.cameras().size());
    std::vector<const LandmarkExtraction*> captured(ncams);
    for (int c = 0; c < ncams; ++c)
        captured[c] = &ctx.captured_extraction(frame, c); // may throw DetectionFailed

    Eigen::VectorXd prior_weights = Eigen::VectorXd::Zero(rig.param_count());
    if (stage.tether_rigid) {
        prior_weights.segment<3>(0).setConstant(stage.prior_theta);
        prior_weights.segment<3>(3).setConstant(stage.prior_t);
    }

    const RenderOptions ropt = ctx.render_options();
    const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd* r, SparseRowMatrix* J) {
        const bool want_jac = J != nullptr;
        const Eigen::VectorXd p_full = expand_mask(p, mask, p_entry);
        const PoseParams pose = PoseParams::from_vector(p_full);
        try {
            const MeshSurface shaped = evaluate_surface(rig, pose.w);
            SparseRowMatrix pose_jac;
            if (want_jac)
                pose_jac = mask_columns(pose_jacobian(rig, pose), mask);
            std::vector<ResidualBlock> blocks;
            for (int c = 0; c < ncams; ++c) {
                const Camera& cam = ctx.cameras()[c];
                const MeshSurface posed = apply_rigid(shaped, pose.theta, pose.t);
                const RenderResult rr = rasterize(cam, posed, ctx.appearance(), ropt);
                const BoundingBox bbox = detect_bbox(rr.image, ctx.bbox_options());
                const LandmarkExtraction ex =
                    extract_landmarks(ctx.feature_backend(), rr.image, bbox, ctx.config().detect);
                SparseRowMatrix render_jac;
                if (want_jac)
                    render_jac = render_jacobian(rr, cam, posed, ctx.appearance());
                const LandmarkChain chain(&ex, &rr.image, &render_jac, &pose_jac);
                ResidualBlock lm = landmark_energy(W, ex.landmarks, captured[c]->landmarks, chain,
                                                   selection, want_jac);
                lm.label = "landmark/" + cam.name;
                lm.weight = stage.landmark_weight;
                if (lm.rows() == 0)
                    return false; // zero valid landmarks
                blocks.push_back(std::move(lm));
                if (stage.edge_weight > 0.0) {
                    ResidualBlock edge = edge_energy(ex.landmarks, captured[c]->landmarks, chain,
                                                     rig.landmark_groups, selection, want_jac);
                    edge.label = "edge/" + cam.name;
                    edge.weight = stage.edge_weight;
                    blocks.push_back(std::move(edge));
                }
            }
            if (stage.reg_lambda > 0.0)
                blocks.push_back(weight_regularizer(stage.reg_lambda, p_full, mask));
            if (stage.tether_rigid)
                blocks.push_back(deviation_prior(p_full, p_entry, prior_weights, mask));
            ResidualBlock stacked = stack(std::move(blocks), mask);
            *r = std::move(stacked.residual);
            if (want_jac)
                *J = std::move(stacked.jacobian);
            return true;
        } catch (const DetectionFailed&) {
            return false;
        }
    };

    StageReport out;
    out.frame = frame.index;
    out.stage = stage.name;
    out.report = dogleg_solve(fn, apply_mask(p_entry, mask), mask, stage.solver);
    frame.params = PoseParams::from_vector(expand_mask(out.report.params, mask, p_entry));
    out.time_ms = elapsed_ms(t0);
    return out;
}

std::vector<StageReport> solve_rigid(PipelineContext& ctx, FrameState& frame)
{
    std::vector<StageReport> reports;
    for (const StageSpec& stage : ctx.config().rigid_stages)
        reports.push_back(run_stage(ctx, frame, stage));
    return reports;
}

std::vector<StageReport> solve_expression(PipelineContext& ctx, FrameState& frame)
{
    std::vector<StageReport> reports;
    for (const StageSpec& stage : ctx.config().expression_stages)
        reports.push_back(run_stage(ctx, frame, stage));
    return reports;
}

std::vector<StageReport> solve_frame(PipelineContext& ctx, FrameState& frame)
{
    std::vector<StageReport> reports;
    try {
        for (const StageSpec& stage : ctx.config().rigid_stages)
            reports.push_back(run_stage(ctx, frame, stage));
        for (const StageSpec& stage : ctx.config().expression_stages)
            reports.push_back(run_stage(ctx, frame, stage));
    } catch (const DetectionFailed&) {
        frame.status = FrameStatus::DetectorFailed;
        return reports;
    }
    for (const StageReport& r : reports) {
        if (r.report.reason == TerminationReason::Aborted) {
            frame.status = FrameStatus::DetectorFailed;
            return reports;
        }
    }
    frame.status = FrameStatus::Solved;
    return reports;
}

namespace {

// One flow block of a temporal solve on the active frame.
struct FlowBlockSpec
{
    enum class Kind { FixedThenActive, ActiveThenFixed, SelfPair };
    Kind kind = Kind::FixedThenActive;
    int camera = 0;
    std::string label;
    const RenderResult* fixed_a = nullptr; // first fixed render
    const RenderResult* fixed_b = nullptr; // second fixed render (SelfPair)
    const FlowField* reference = nullptr;
};

SolveReport solve_flow_frame(PipelineContext& ctx, FrameState& frame,
                             const std::vector<FlowBlockSpec>& specs, const Eigen::VectorXd& init_full,
                             double prior_weight, const SolveOptions& options)
{
    const FaceRig& rig = ctx.rig();
    const ParamMask mask = ParamMask::all(rig.param_count());
    const RenderOptions ropt = ctx.render_options();
    const int res = ctx.flow_backend().resolution();
    const int dilation = ctx.config().flow_mask_dilation;
    Eigen::VectorXd prior_weights = Eigen::VectorXd::Constant(rig.param_count(), prior_weight);

    const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd* r, SparseRowMatrix* J) {
        const bool want_jac = J != nullptr;
        const Eigen::VectorXd p_full = expand_mask(p, mask, init_full);
        const PoseParams pose = PoseParams::from_vector(p_full);
        const MeshSurface posed = apply_rigid(evaluate_surface(rig, pose.w), pose.theta, pose.t);
        SparseRowMatrix pose_jac;
        if (want_jac)
            pose_jac = mask_columns(pose_jacobian(rig, pose), mask);
        std::vector<RenderResult> renders(ctx.cameras().size());
        std::vector<std::vector<Image>> tangents(ctx.cameras().size());
        std::vector<bool> have(ctx.cameras().size(), false);
        std::vector<ResidualBlock> blocks;
        for (const FlowBlockSpec& spec : specs) {
            if (!have[spec.camera]) {
                renders[spec.camera] = rasterize(ctx.cameras()[spec.camera], posed, ctx.appearance(), ropt);
                if (want_jac) {
                    const SparseRowMatrix rj =
                        render_jacobian(renders[spec.camera], ctx.cameras()[spec.camera], posed, ctx.appearance());
                    tangents[spec.camera] = render_tangents(renders[spec.camera], rj, pose_jac);
                }
                have[spec.camera] = true;
            }
            const RenderResult& active = renders[spec.camera];
            std::vector<FlowEnergyTerm> terms;
            std::vector<const RenderResult*> involved;
            switch (spec.kind) {
            case FlowBlockSpec::Kind::FixedThenActive:
                terms.push_back({&spec.fixed_a->image, &active.image, false, true, 1.0});
                involved = {spec.fixed_a, &active};
                break;
            case FlowBlockSpec::Kind::ActiveThenFixed:
                terms.push_back({&active.image, &spec.fixed_a->image, true, false, 1.0});
                involved = {&active, spec.fixed_a};
                break;
            case FlowBlockSpec::Kind::SelfPair:
                terms.push_back({&spec.fixed_a->image, &active.image, false, true, 1.0});
                terms.push_back({&active.image, &spec.fixed_b->image, true, false, -1.0});
                involved = {spec.fixed_a, &active, spec.fixed_b};
                break;
            }
            const std::vector<uint8_t> fg = flow_foreground_mask(involved, res, dilation);
            blocks.push_back(flow_match_energy(ctx.flow_backend(), terms, spec.reference,
                                               tangents[spec.camera], fg, spec.label, want_jac));
        }
        if (prior_weight > 0.0)
            blocks.push_back(deviation_prior(p_full, init_full, prior_weights, mask));
        ResidualBlock stacked = stack(std::move(blocks), mask);
        *r = std::move(stacked.residual);
        if (want_jac)
            *J = std::move(stacked.jacobian);
        return true;
    };

    SolveReport report = dogleg_solve(fn, apply_mask(init_full, mask), mask, options);
    frame.params = PoseParams::from_vector(expand_mask(report.params, mask, init_full));
    return report;
}

RenderResult render_frame(PipelineContext& ctx, const PoseParams& pose, int camera)
{
    const MeshSurface posed = apply_rigid(evaluate_surface(ctx.rig(), pose.w), pose.theta, pose.t);
    return rasterize(ctx.cameras()[camera], posed, ctx.appearance(), ctx.render_options());
}

} // namespace

std::vector<StageReport> infill(PipelineContext& ctx, std::vector<FrameState>& sequence,
                                const std::vector<int>& failed_indices)
{
    std::vector<StageReport> reports;
    if (failed_indices.empty())
        return reports;
    std::vector<int> failed = failed_indices;
    std::sort(failed.begin(), failed.end());
    const int n = static_cast<int>(sequence.size());
    for (int f : failed)
        if (f < 0 || f >= n)
            throw FaceFitError("infill: failed index out of range");

    const int ncams = static_cast<int>(ctx.cameras().size());
    // Group into consecutive runs.
    size_t i = 0;
    while (i < failed.size()) {
        size_t j = i;
        while (j + 1 < failed.size() && failed[j + 1] == failed[j] + 1)
            ++j;
        const int a = failed[i], b = failed[j];
        const bool has_left = a > 0;
        const bool has_right = b < n - 1;
        if (!has_left && !has_right)
            throw FaceFitError("infill: run covers the whole sequence, no anchors");

        for (int sweep = 0; sweep < ctx.config().infill.sweeps; ++sweep) {
            bool forward = sweep % 2 == 0;
            if (forward && !has_left)
                forward = false; // boundary run: one-sided sweeps only
            if (!forward && !has_right)
                forward = true;
            std::vector<int> order;
            for (int f = a; f <= b; ++f)
                order.push_back(f);
            if (!forward)
                std::reverse(order.begin(), order.end());
            for (int f : order) {
                const int prev = forward ? f - 1 : f + 1;
                if (sweep == 0)
                    sequence[f].params = sequence[prev].params; // initial guess from the neighbor
                std::vector<RenderResult> prev_renders(ncams);
                std::vector<FlowBlockSpec> specs;
                for (int c = 0; c < ncams; ++c) {
                    prev_renders[c] = render_frame(ctx, sequence[prev].params, c);
                    FlowBlockSpec spec;
                    spec.kind = FlowBlockSpec::Kind::FixedThenActive;
                    spec.camera = c;
                    spec.label = "flow/" + ctx.cameras()[c].name;
                    spec.fixed_a = &prev_renders[c];
                    spec.reference = &ctx.plate_flow(sequence[prev], sequence[f], c);
                    specs.push_back(spec);
                }
                StageReport rep;
                rep.frame = f;
                rep.stage = forward ? "infill_fwd" : "infill_bwd";
                const auto t0 = std::chrono::steady_clock::now();
                rep.report = solve_flow_frame(ctx, sequence[f], specs, sequence[f].params.to_vector(),
                                              ctx.config().infill.prior_weight, ctx.config().infill.solver);
                rep.time_ms = elapsed_ms(t0);
                reports.push_back(std::move(rep));
                sequence[f].status = FrameStatus::Infilled;
            }
        }
        i = j + 1;
    }
    return reports;
}

namespace {

void averaging_pass(PipelineContext& ctx, std::vector<FrameState>& sequence,
                    const std::array<double, 3>& window)
{
    const int n = static_cast<int>(sequence.size());
    std::vector<PoseParams> old(n);
    for (int i = 0; i < n; ++i)
        old[i] = sequence[i].params;
    for (int i = 0; i < n; ++i) {
        std::vector<int> idx;
        std::vector<double> wts;
        for (int k = -1; k <= 1; ++k) {
            const int j = i + k;
            if (j < 0 || j >= n)
                continue; // boundary: one-sided window, renormalized
            idx.push_back(j);
            wts.push_back(window[k + 1]);
        }
        double total = 0.0;
        for (double w : wts)
            total += w;
        Eigen::Vector3d t = Eigen::Vector3d::Zero();
        Eigen::VectorXd w_avg = Eigen::VectorXd::Zero(old[i].w.size());
        std::vector<Eigen::Quaterniond> quats;
        Eigen::VectorXd qw(idx.size());
        for (size_t k = 0; k < idx.size(); ++k) {
            const double w = wts[k] / total;
            t += w * old[idx[k]].t;
            w_avg += w * old[idx[k]].w;
            quats.push_back(euler_to_quaternion(old[idx[k]].theta));
            qw[static_cast<int>(k)] = w;
        }
        sequence[i].params.t = t;
        sequence[i].params.w = w_avg;
        sequence[i].params.theta =
            quaternion_to_euler_near(quaternion_average(quats, qw), old[i].theta);
    }
}

std::vector<StageReport> flow_pass(PipelineContext& ctx, std::vector<FrameState>& sequence,
                                   const SmoothingConfig& cfg, SmoothingMode mode, int sweep)
{
    std::vector<StageReport> reports;
    const int n = static_cast<int>(sequence.size());
    const int ncams = static_cast<int>(ctx.cameras().size());
    std::vector<PoseParams> old(n);
    for (int i = 0; i < n; ++i)
        old[i] = sequence[i].params;

    // Jacobi semantics: neighbor renders at last-sweep parameters, computed
    // once per pass. Gauss-Seidel re-renders neighbors on demand.
    std::vector<std::vector<RenderResult>> neighbor_renders;
    if (!cfg.gauss_seidel) {
        neighbor_renders.resize(n);
        for (int i = 0; i < n; ++i) {
            neighbor_renders[i].resize(ncams);
            for (int c = 0; c < ncams; ++c)
                neighbor_renders[i][c] = render_frame(ctx, old[i], c);
        }
    }

    std::vector<PoseParams> updated(n);
    for (int i = 0; i < n; ++i)
        updated[i] = sequence[i].params;

    for (int i = 0; i < n; ++i) {
        const bool has_left = i > 0;
        const bool has_right = i < n - 1;
        if (mode == SmoothingMode::SelfFlow && (!has_left || !has_right))
            continue;
        if (!has_left && !has_right)
            continue;

        std::vector<RenderResult> gs_renders; // keeps Gauss-Seidel renders alive
        gs_renders.reserve(2 * ncams);
        const auto neighbor_render = [&](int j, int c) -> const RenderResult* {
            if (cfg.gauss_seidel) {
                gs_renders.push_back(render_frame(
                    ctx, j < i ? updated[j] : old[j], c)); // left neighbors already updated
                return &gs_renders.back();
            }
            return &neighbor_renders[j][c];
        };

        std::vector<FlowBlockSpec> specs;
        for (int c = 0; c < ncams; ++c) {
            if (mode == SmoothingMode::SelfFlow) {
                FlowBlockSpec spec;
                spec.kind = FlowBlockSpec::Kind::SelfPair;
                spec.camera = c;
                spec.label = "selfflow/" + ctx.cameras()[c].name;
                spec.fixed_a = neighbor_render(i - 1, c);
                spec.fixed_b = neighbor_render(i + 1, c);
                specs.push_back(spec);
            } else {
                if (has_left) {
                    FlowBlockSpec spec;
                    spec.kind = FlowBlockSpec::Kind::FixedThenActive;
                    spec.camera = c;
                    spec.label = "plateflow_l/" + ctx.cameras()[c].name;
                    spec.fixed_a = neighbor_render(i - 1, c);
                    spec.reference = &ctx.plate_flow(sequence[i - 1], sequence[i], c);
                    specs.push_back(spec);
                }
                if (has_right) {
                    FlowBlockSpec spec;
                    spec.kind = FlowBlockSpec::Kind::ActiveThenFixed;
                    spec.camera = c;
                    spec.label = "plateflow_r/" + ctx.cameras()[c].name;
                    spec.fixed_a = neighbor_render(i + 1, c);
                    spec.reference = &ctx.plate_flow(sequence[i], sequence[i + 1], c);
                    specs.push_back(spec);
                }
            }
        }

        FrameState scratch = sequence[i];
        scratch.params = old[i];
        StageReport rep;
        rep.frame = sequence[i].index;
        rep.stage = (mode == SmoothingMode::SelfFlow ? "smooth_self_" : "smooth_plate_") +
                    std::to_string(sweep);
        const auto t0 = std::chrono::steady_clock::now();
        rep.report = solve_flow_frame(ctx, scratch, specs, old[i].to_vector(), cfg.prior_weight,
                                      cfg.solver);
        rep.time_ms = elapsed_ms(t0);
        reports.push_back(std::move(rep));
        updated[i] = scratch.params;
        if (cfg.gauss_seidel)
            sequence[i].params = scratch.params;
    }
    for (int i = 0; i < n; ++i)
        sequence[i].params = updated[i]; // Jacobi commit barrier
    return reports;
}

} // namespace

std::vector<StageReport> smooth(PipelineContext& ctx, std::vector<FrameState>& sequence,
                                const SmoothingConfig& config)
{
    config.validate();
    std::vector<StageReport> reports;
    switch (config.mode) {
    case SmoothingMode::Averaging:
        for (int s = 0; s < config.sweeps; ++s)
            averaging_pass(ctx, sequence, config.window);
        break;
    case SmoothingMode::SelfFlow:
    case SmoothingMode::PlateFlow:
        for (int s = 0; s < config.sweeps; ++s) {
            auto r = flow_pass(ctx, sequence, config, config.mode, s);
            reports.insert(reports.end(), r.begin(), r.end());
        }
        break;
    case SmoothingMode::Hybrid:
        averaging_pass(ctx, sequence, config.window);
        for (int s = 0; s < config.sweeps; ++s) {
            auto r = flow_pass(ctx, sequence, config, SmoothingMode::PlateFlow, s);
            reports.insert(reports.end(), r.begin(), r.end());
        }
        break;
    }
    for (FrameState& f : sequence)
        if (f.status != FrameStatus::Unsolved)
            f.status = FrameStatus::Smoothed;
    return reports;
}

std::vector<StageReport> reestimate_expression(PipelineContext& ctx, std::vector<FrameState>& sequence)
{
    std::vector<StageReport> reports;
    for (FrameState& frame : sequence)
        reports.push_back(run_stage(ctx, frame, ctx.config().reestimation_stage));
    return reports;
}

Eigen::Quaterniond quaternion_average(const std::vector<Eigen::Quaterniond>& quats,
                                      const Eigen::VectorXd& weights)
{
    if (quats.empty() || static_cast<int>(quats.size()) != weights.size())
        throw FaceFitError("quaternion_average: empty input or weight mismatch");
    if ((weights.array() <= 0.0).any())
        throw FaceFitError("quaternion_average: weights must be positive");
    Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
    for (size_t i = 0; i < quats.size(); ++i) {
        const Eigen::Vector4d q = quats[i].normalized().coeffs(); // (x, y, z, w)
        M += weights[static_cast<int>(i)] * q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(M);
    const Eigen::Vector4d evals = eig.eigenvalues(); // ascending
    if (evals[3] - evals[2] <= 1e-9 * std::max(evals[3], 1e-12))
        throw DegenerateInput("quaternion_average: top eigenvalue not isolated");
    Eigen::Vector4d v = eig.eigenvectors().col(3);
    if (v[3] < 0.0)
        v = -v;
    Eigen::Quaterniond q(v[3], v[0], v[1], v[2]);
    q.normalize();
    return q;
}

} // namespace facefit
