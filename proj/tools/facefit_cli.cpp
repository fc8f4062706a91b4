/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: tools/facefit_cli.cpp
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
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "facefit/appearance_fit.h"
#include "facefit/diagnostics.h"
#include "facefit/face_model.h"
#include "facefit/pipeline.h"
#include "facefit/scenario.h"
#include "facefit/serialize.h"

namespace fs = std::filesystem;
using namespace facefit;

namespace {

struct CommonArgs
{
    std::string manifest_path;
    std::string config_path;
    std::string output_dir;
    std::string frames_range;
    std::vector<std::string> cameras;
    std::optional<std::uint64_t> seed;
    bool continue_on_error = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_output = true)
{
    cmd->add_option("--manifest", args.manifest_path, "Sequence manifest file")->required();
    cmd->add_option("--config", args.config_path, "Solve config file (defaults when omitted)");
    if (needs_output)
        cmd->add_option("--output-dir", args.output_dir, "Output directory")->required();
    cmd->add_option("--frames", args.frames_range, "Frame range A..B (inclusive)");
    cmd->add_option("--cameras", args.cameras, "Camera names to use")->delimiter(',');
    cmd->add_option("--seed", args.seed, "Seed override for the run header");
    cmd->add_flag("--continue-on-error", args.continue_on_error,
                  "Keep going over frame-level failures and exit zero");
}

std::pair<int, int> parse_range(const std::string& s)
{
    if (s.empty())
        return {-1, -1};
    const auto dots = s.find("..");
    if (dots == std::string::npos)
        throw FaceFitError("frame range must look like A..B");
    return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
}

SolveConfig load_config_or_default(const std::string& path)
{
    if (path.empty())
        return SolveConfig{};
    return load_config(path);
}

struct LoadedRun
{
    SequenceManifest manifest;
    SolveConfig config;
    FaceRig rig;
    AppearanceModel appearance;
    std::vector<FrameState> frames;
};

LoadedRun load_run_inputs(const CommonArgs& args, bool need_appearance,
                          const std::string& appearance_override = "")
{
    LoadedRun run;
    run.manifest = load_manifest(args.manifest_path);
    if (!args.cameras.empty())
        run.manifest.select_cameras(args.cameras);
    run.config = load_config_or_default(args.config_path);
    if (args.seed)
        run.config.seed = *args.seed;
    run.rig = load_rig(run.manifest.resolve(run.manifest.rig_path));
    if (!appearance_override.empty())
        run.appearance = load_appearance(appearance_override);
    else if (!run.manifest.appearance_path.empty())
        run.appearance = load_appearance(run.manifest.resolve(run.manifest.appearance_path));
    else if (need_appearance)
        throw FaceFitError("manifest has no appearance model; run fit-appearance first or pass --appearance");
    const auto [a, b] = parse_range(args.frames_range);
    run.frames = load_frames(run.manifest, a, b);
    if (run.frames.empty())
        throw FaceFitError("no frames selected");
    return run;
}

std::string params_rel_path(int index)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "params/frame_%04d.pose.json", index);
    return buf;
}

void write_run_outputs(const std::string& out_dir, const SolveConfig& config,
                       const std::vector<FrameState>& frames, const std::vector<StageReport>& reports)
{
    fs::create_directories(fs::path(out_dir) / "params");
    RunManifest rm;
    rm.config_hash = config_hash(config);
    rm.seed = config.seed;
    for (const FrameState& f : frames) {
        RunManifest::Entry e;
        e.index = f.index;
        e.status = f.status;
        e.params_path = params_rel_path(f.index);
        save_pose((fs::path(out_dir) / e.params_path).string(), f.params);
        rm.frames.push_back(e);
    }
    save_run_manifest((fs::path(out_dir) / "run_manifest.json").string(), rm);
    write_diagnostics_csv((fs::path(out_dir) / "diagnostics.csv").string(), reports);
    save_config((fs::path(out_dir) / "config.json").string(), config);
}

void apply_previous_run(std::vector<FrameState>& frames, const std::string& run_dir)
{
    const RunManifest rm = load_run_manifest((fs::path(run_dir) / "run_manifest.json").string());
    for (FrameState& f : frames) {
        bool found = false;
        for (const RunManifest::Entry& e : rm.frames) {
            if (e.index == f.index) {
                f.status = e.status;
                if (!e.params_path.empty())
                    f.params = load_pose(rm.resolve(e.params_path));
                found = true;
                break;
            }
        }
        if (!found)
            throw FaceFitError("previous run has no entry for frame " + std::to_string(f.index));
    }
}

int frame_failures(const std::vector<FrameState>& frames)
{
    int n = 0;
    for (const FrameState& f : frames)
        n += f.status == FrameStatus::DetectorFailed;
    return n;
}

int cmd_synth(const std::string& scenario_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed)
{
    SyntheticScenario scenario = load_scenario(scenario_path);
    if (seed)
        scenario.seed = *seed;
    generate_synthetic(scenario, out_dir);
    std::cout << "wrote " << scenario.trajectory.size() << " frames to " << out_dir << "\n";
    return 0;
}

int cmd_fit_appearance(const CommonArgs& args, const std::string& output_path, int frame_index,
                       const std::string& params_path)
{
    LoadedRun run = load_run_inputs(args, false);
    const FrameState* frame = nullptr;
    const int want = frame_index >= 0 ? frame_index : run.manifest.fit_frame;
    for (const FrameState& f : run.frames)
        if (f.index == want)
            frame = &f;
    if (!frame)
        throw FaceFitError("fit frame " + std::to_string(want) + " not in the selected range");

    PoseParams pose = PoseParams::zero(run.rig);
    if (!params_path.empty()) {
        pose = load_pose(params_path);
    } else {
        // Rough rigid alignment first, rendered with a neutral-gray
        // appearance; the landmark chain only needs the fiducials.
        PipelineContext ctx(&run.rig, run.manifest.cameras,
                            AppearanceModel::constant(run.rig.vertex_count(), {0.55, 0.55, 0.55}),
                            run.config);
        FrameState scratch = *frame;
        scratch.params = pose;
        for (const StageSpec& stage : run.config.rigid_stages)
            run_stage(ctx, scratch, stage);
        pose = scratch.params;
    }

    const MeshSurface posed = apply_rigid(evaluate_surface(run.rig, pose.w), pose.theta, pose.t);
    AppearanceFitOptions opt;
    opt.render.background = run.config.background;
    // Ignore the fiducial disks baked into synthetic plates.
    const Camera& cam = run.manifest.cameras.front();
    std::vector<uint8_t> exclude(static_cast<size_t>(cam.width) * cam.height, 0);
    const std::vector<Eigen::Vector3d> palette = fiducial_palette(kNumLandmarks);
    const double r = 1.5 * run.config.fiducials.radius;
    for (int i = 0; i < kNumLandmarks; ++i) {
        const Projection pr = project(cam, posed.vertices.col(run.rig.landmark_vertices[i]));
        if (!pr.valid)
            continue;
        for (int y = std::max(0, int(pr.pixel.y() - r)); y <= std::min(cam.height - 1, int(pr.pixel.y() + r)); ++y)
            for (int x = std::max(0, int(pr.pixel.x() - r)); x <= std::min(cam.width - 1, int(pr.pixel.x() + r)); ++x)
                if ((Eigen::Vector2d(x, y) - pr.pixel).norm() <= r)
                    exclude[static_cast<size_t>(y) * cam.width + x] = 1;
    }
    opt.exclude_mask = exclude;
    const AppearanceModel fitted = fit_appearance(frame->images.front(), cam, posed, opt);
    save_appearance(output_path, fitted);
    std::cout << "wrote appearance model to " << output_path << "\n";
    return 0;
}

int cmd_solve(const CommonArgs& args)
{
    LoadedRun run = load_run_inputs(args, true);
    PipelineContext ctx(&run.rig, run.manifest.cameras, run.appearance, run.config);
    std::vector<StageReport> reports;
    for (FrameState& frame : run.frames) {
        auto r = solve_frame(ctx, frame);
        reports.insert(reports.end(), r.begin(), r.end());
        std::cout << "frame " << frame.index << ": " << to_string(frame.status) << "\n";
    }
    write_run_outputs(args.output_dir, run.config, run.frames, reports);
    const int failures = frame_failures(run.frames);
    if (failures > 0 && !args.continue_on_error) {
        std::cerr << failures << " frame(s) failed detection\n";
        return 1;
    }
    return 0;
}

int cmd_infill(const CommonArgs& args, const std::string& run_dir, std::vector<int> failed)
{
    LoadedRun run = load_run_inputs(args, true);
    apply_previous_run(run.frames, run_dir);
    if (failed.empty())
        for (size_t i = 0; i < run.frames.size(); ++i)
            if (run.frames[i].status == FrameStatus::DetectorFailed)
                failed.push_back(static_cast<int>(i));
    // Translate frame indices to positions in the loaded window.
    std::vector<int> positions;
    for (int idx : failed) {
        int pos = -1;
        for (size_t i = 0; i < run.frames.size(); ++i)
            if (run.frames[i].index == idx)
                pos = static_cast<int>(i);
        if (pos < 0)
            throw FaceFitError("failed frame " + std::to_string(idx) + " not in the selected range");
        positions.push_back(pos);
    }
    PipelineContext ctx(&run.rig, run.manifest.cameras, run.appearance, run.config);
    const std::vector<StageReport> reports = infill(ctx, run.frames, positions);
    write_run_outputs(args.output_dir, run.config, run.frames, reports);
    std::cout << "infilled " << positions.size() << " frame(s)\n";
    return 0;
}

int cmd_smooth(const CommonArgs& args, const std::string& run_dir, const std::string& mode)
{
    LoadedRun run = load_run_inputs(args, true);
    apply_previous_run(run.frames, run_dir);
    SmoothingConfig cfg = run.config.smoothing;
    if (!mode.empty()) {
        if (mode == "averaging") cfg.mode = SmoothingMode::Averaging;
        else if (mode == "self_flow") cfg.mode = SmoothingMode::SelfFlow;
        else if (mode == "plate_flow") cfg.mode = SmoothingMode::PlateFlow;
        else if (mode == "hybrid") cfg.mode = SmoothingMode::Hybrid;
        else throw FaceFitError("unknown smoothing mode: " + mode);
    }
    PipelineContext ctx(&run.rig, run.manifest.cameras, run.appearance, run.config);
    const std::vector<StageReport> reports = smooth(ctx, run.frames, cfg);
    write_run_outputs(args.output_dir, run.config, run.frames, reports);
    std::cout << "smoothed " << run.frames.size() << " frame(s)\n";
    return 0;
}

int cmd_reestimate(const CommonArgs& args, const std::string& run_dir)
{
    LoadedRun run = load_run_inputs(args, true);
    apply_previous_run(run.frames, run_dir);
    PipelineContext ctx(&run.rig, run.manifest.cameras, run.appearance, run.config);
    const std::vector<StageReport> reports = reestimate_expression(ctx, run.frames);
    write_run_outputs(args.output_dir, run.config, run.frames, reports);
    std::cout << "re-estimated expression on " << run.frames.size() << " frame(s)\n";
    return 0;
}

int cmd_report(const std::string& manifest_path, const std::string& run_dir,
               const std::string& output_path)
{
    const SequenceManifest manifest = load_manifest(manifest_path);
    const RunManifest rm = load_run_manifest((fs::path(run_dir) / "run_manifest.json").string());
    const FaceRig rig = load_rig(manifest.resolve(manifest.rig_path));
    const Camera& cam = manifest.cameras.front();
    std::vector<FrameErrors> errors;
    for (const RunManifest::Entry& e : rm.frames) {
        const FrameRecord* rec = nullptr;
        for (const FrameRecord& r : manifest.frames)
            if (r.index == e.index)
                rec = &r;
        if (!rec || rec->ground_truth.empty() || e.params_path.empty())
            continue;
        const PoseParams est = load_pose(rm.resolve(e.params_path));
        const PoseParams gt = load_pose(manifest.resolve(rec->ground_truth));
        errors.push_back(compute_frame_errors(rig, cam, e.index, est, gt));
    }
    if (errors.empty())
        throw FaceFitError("no frames with ground truth to report on");
    write_report_csv(output_path, errors);
    std::vector<double> rot, trans, lm;
    for (const FrameErrors& e : errors) {
        rot.push_back(e.rotation_angle_deg);
        trans.push_back(e.t_error_norm);
        lm.push_back(e.landmark_error_px);
    }
    const auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    std::cout << "frames: " << errors.size() << "\n"
              << "median rotation error: " << median(rot) << " deg\n"
              << "median translation error: " << median(trans) << " (model units)\n"
              << "median landmark error: " << median(lm) << " px\n"
              << "wrote " << output_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"facefit: blendshape face rig fitting from calibrated image sequences"};
    app.require_subcommand(1);

    // synth
    std::string scenario_path, synth_out;
    std::optional<std::uint64_t> synth_seed;
    CLI::App* synth = app.add_subcommand("synth", "Render a synthetic scenario with ground truth");
    synth->add_option("--scenario", scenario_path, "Scenario json")->required();
    synth->add_option("--output-dir", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_seed, "Seed override");

    // fit-appearance
    CommonArgs fit_args;
    std::string fit_output, fit_params;
    int fit_frame = -1;
    CLI::App* fit = app.add_subcommand("fit-appearance", "Estimate albedo and SH lighting");
    add_common(fit, fit_args, false);
    fit->add_option("--output", fit_output, "Appearance output path")->required();
    fit->add_option("--frame", fit_frame, "Frame to fit on (default: manifest fit_frame)");
    fit->add_option("--params", fit_params, "Known pose for the fit frame (skips alignment)");

    // solve
    CommonArgs solve_args;
    std::string solve_appearance;
    CLI::App* solve = app.add_subcommand("solve", "Staged rigid + expression solve per frame");
    add_common(solve, solve_args);
    solve->add_option("--appearance", solve_appearance, "Appearance model override");

    // infill
    CommonArgs infill_args;
    std::string infill_run;
    std::vector<int> infill_failed;
    CLI::App* infill_cmd = app.add_subcommand("infill", "Flow-based infill of failed frames");
    add_common(infill_cmd, infill_args);
    infill_cmd->add_option("--run-dir", infill_run, "Previous run directory")->required();
    infill_cmd->add_option("--failed", infill_failed, "Frame indices to infill")->delimiter(',');

    // smooth
    CommonArgs smooth_args;
    std::string smooth_run, smooth_mode;
    CLI::App* smooth_cmd = app.add_subcommand("smooth", "Temporal refinement");
    add_common(smooth_cmd, smooth_args);
    smooth_cmd->add_option("--run-dir", smooth_run, "Previous run directory")->required();
    smooth_cmd->add_option("--mode", smooth_mode, "averaging | self_flow | plate_flow | hybrid");

    // reestimate
    CommonArgs re_args;
    std::string re_run;
    CLI::App* re_cmd = app.add_subcommand("reestimate", "Expression re-estimation after smoothing");
    add_common(re_cmd, re_args);
    re_cmd->add_option("--run-dir", re_run, "Previous run directory")->required();

    // report
    std::string report_manifest, report_run, report_out;
    CLI::App* report_cmd = app.add_subcommand("report", "Error summary against ground truth");
    report_cmd->add_option("--manifest", report_manifest, "Sequence manifest")->required();
    report_cmd->add_option("--run-dir", report_run, "Run directory")->required();
    report_cmd->add_option("--output", report_out, "Report csv path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth(scenario_path, synth_out, synth_seed);
        if (fit->parsed())
            return cmd_fit_appearance(fit_args, fit_output, fit_frame, fit_params);
        if (solve->parsed()) {
            if (!solve_appearance.empty()) {
                LoadedRun run = load_run_inputs(solve_args, false, solve_appearance);
                PipelineContext ctx(&run.rig, run.manifest.cameras, run.appearance, run.config);
                std::vector<StageReport> reports;
                for (FrameState& frame : run.frames) {
                    auto r = solve_frame(ctx, frame);
                    reports.insert(reports.end(), r.begin(), r.end());
                    std::cout << "frame " << frame.index << ": " << to_string(frame.status) << "\n";
                }
                write_run_outputs(solve_args.output_dir, run.config, run.frames, reports);
                const int failures = frame_failures(run.frames);
                return failures > 0 && !solve_args.continue_on_error ? 1 : 0;
            }
            return cmd_solve(solve_args);
        }
        if (infill_cmd->parsed())
            return cmd_infill(infill_args, infill_run, infill_failed);
        if (smooth_cmd->parsed())
            return cmd_smooth(smooth_args, smooth_run, smooth_mode);
        if (re_cmd->parsed())
            return cmd_reestimate(re_args, re_run);
        if (report_cmd->parsed())
            return cmd_report(report_manifest, report_run, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
