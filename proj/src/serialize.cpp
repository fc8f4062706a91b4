/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/serialize.cpp
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
#include "facefit/serialize.h"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "facefit/image_io.h"

namespace facefit {

namespace {

using nlohmann::json;

json load_json(const std::string& path, const char* expected_format)
{
    std::ifstream f(path);
    if (!f)
        throw FaceFitError("cannot open file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw FaceFitError("malformed json in " + path + ": " + e.what());
    }
    if (expected_format && j.value("format", "") != expected_format)
        throw FaceFitError(path + ": expected format \"" + expected_format + "\"");
    return j;
}

void write_json(const std::string& path, const json& j)
{
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream f(path);
    if (!f)
        throw FaceFitError("cannot open file for writing: " + path);
    f << j.dump(1, '\t') << "\n";
    if (!f)
        throw FaceFitError("write failed: " + path);
}

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 3)
        throw FaceFitError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json mat3_to_json(const Eigen::Matrix3d& m)
{
    json rows = json::array();
    for (int r = 0; r < 3; ++r)
        rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
    return rows;
}

Eigen::Matrix3d mat3_from_json(const json& j)
{
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            m(r, c) = j.at(r).at(c).get<double>();
    return m;
}

json vecx_to_json(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (int i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vecx_from_json(const json& j)
{
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i)
        v[static_cast<int>(i)] = j[i].get<double>();
    return v;
}

json points_to_json(const Eigen::Matrix3Xd& m)
{
    json a = json::array();
    for (int c = 0; c < m.cols(); ++c)
        a.push_back(json::array({m(0, c), m(1, c), m(2, c)}));
    return a;
}

Eigen::Matrix3Xd points_from_json(const json& j)
{
    Eigen::Matrix3Xd m(3, j.size());
    for (size_t c = 0; c < j.size(); ++c)
        for (int r = 0; r < 3; ++r)
            m(r, static_cast<int>(c)) = j[c].at(r).get<double>();
    return m;
}

const char* tag_name(ShapeTag t)
{
    switch (t) {
    case ShapeTag::Jaw: return "jaw";
    case ShapeTag::Mouth: return "mouth";
    case ShapeTag::Other: return "other";
    }
    return "other";
}

ShapeTag tag_from_name(const std::string& s)
{
    if (s == "jaw") return ShapeTag::Jaw;
    if (s == "mouth") return ShapeTag::Mouth;
    if (s == "other") return ShapeTag::Other;
    throw FaceFitError("unknown shape tag: " + s);
}

const char* kind_name(ShapeKind k)
{
    switch (k) {
    case ShapeKind::Delta: return "delta";
    case ShapeKind::JawRx: return "jaw_rx";
    case ShapeKind::JawRy: return "jaw_ry";
    case ShapeKind::JawRz: return "jaw_rz";
    case ShapeKind::JawTx: return "jaw_tx";
    case ShapeKind::JawTy: return "jaw_ty";
    case ShapeKind::JawTz: return "jaw_tz";
    }
    return "delta";
}

ShapeKind kind_from_name(const std::string& s)
{
    if (s == "delta") return ShapeKind::Delta;
    if (s == "jaw_rx") return ShapeKind::JawRx;
    if (s == "jaw_ry") return ShapeKind::JawRy;
    if (s == "jaw_rz") return ShapeKind::JawRz;
    if (s == "jaw_tx") return ShapeKind::JawTx;
    if (s == "jaw_ty") return ShapeKind::JawTy;
    if (s == "jaw_tz") return ShapeKind::JawTz;
    throw FaceFitError("unknown shape kind: " + s);
}

const char* group_name(LandmarkGroup g)
{
    switch (g) {
    case LandmarkGroup::Jaw: return "jaw";
    case LandmarkGroup::Mouth: return "mouth";
    case LandmarkGroup::Other: return "other";
    }
    return "other";
}

LandmarkGroup group_from_name(const std::string& s)
{
    if (s == "jaw") return LandmarkGroup::Jaw;
    if (s == "mouth") return LandmarkGroup::Mouth;
    if (s == "other") return LandmarkGroup::Other;
    throw FaceFitError("unknown landmark group: " + s);
}

json camera_to_json(const Camera& c)
{
    json j;
    j["name"] = c.name;
    j["width"] = c.width;
    j["height"] = c.height;
    j["fx"] = c.fx;
    j["fy"] = c.fy;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    j["rotation"] = mat3_to_json(c.rotation);
    j["translation"] = vec3_to_json(c.translation);
    return j;
}

Camera camera_from_json(const json& j)
{
    Camera c;
    c.name = j.at("name").get<std::string>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.rotation = mat3_from_json(j.at("rotation"));
    c.translation = vec3_from_json(j.at("translation"));
    c.validate();
    return c;
}

json solver_to_json(const SolveOptions& o)
{
    json j;
    j["max_iterations"] = o.max_iterations;
    j["initial_radius"] = o.initial_radius;
    j["min_radius"] = o.min_radius;
    j["max_radius"] = o.max_radius;
    j["accept_threshold"] = o.accept_threshold;
    j["expand_threshold"] = o.expand_threshold;
    j["shrink_factor"] = o.shrink_factor;
    j["expand_factor"] = o.expand_factor;
    j["gradient_tolerance"] = o.gradient_tolerance;
    j["step_tolerance"] = o.step_tolerance;
    j["gn_regularization"] = o.gn_regularization;
    return j;
}

SolveOptions solver_from_json(const json& j, SolveOptions o)
{
    o.max_iterations = j.value("max_iterations", o.max_iterations);
    o.initial_radius = j.value("initial_radius", o.initial_radius);
    o.min_radius = j.value("min_radius", o.min_radius);
    o.max_radius = j.value("max_radius", o.max_radius);
    o.accept_threshold = j.value("accept_threshold", o.accept_threshold);
    o.expand_threshold = j.value("expand_threshold", o.expand_threshold);
    o.shrink_factor = j.value("shrink_factor", o.shrink_factor);
    o.expand_factor = j.value("expand_factor", o.expand_factor);
    o.gradient_tolerance = j.value("gradient_tolerance", o.gradient_tolerance);
    o.step_tolerance = j.value("step_tolerance", o.step_tolerance);
    o.gn_regularization = j.value("gn_regularization", o.gn_regularization);
    return o;
}

const char* subset_name(LandmarkSubset s)
{
    switch (s) {
    case LandmarkSubset::All: return "all";
    case LandmarkSubset::NonJaw: return "non_jaw";
    case LandmarkSubset::JawOnly: return "jaw_only";
    }
    return "all";
}

LandmarkSubset subset_from_name(const std::string& s)
{
    if (s == "all") return LandmarkSubset::All;
    if (s == "non_jaw") return LandmarkSubset::NonJaw;
    if (s == "jaw_only") return LandmarkSubset::JawOnly;
    throw FaceFitError("unknown landmark subset: " + s);
}

json stage_to_json(const StageSpec& s)
{
    json j;
    j["name"] = s.name;
    j["solve_theta"] = s.solve_theta;
    j["solve_t"] = s.solve_t;
    j["shapes"] = s.shape_selectors;
    j["subset"] = subset_name(s.subset);
    j["weights"] = s.weights == WeightPreset::MouthHeavy ? "mouth_heavy" : "uniform";
    j["landmark_weight"] = s.landmark_weight;
    j["edge_weight"] = s.edge_weight;
    j["reg_lambda"] = s.reg_lambda;
    j["tether_rigid"] = s.tether_rigid;
    j["prior_theta"] = s.prior_theta;
    j["prior_t"] = s.prior_t;
    j["solver"] = solver_to_json(s.solver);
    return j;
}

StageSpec stage_from_json(const json& j)
{
    StageSpec s;
    s.name = j.at("name").get<std::string>();
    s.solve_theta = j.value("solve_theta", false);
    s.solve_t = j.value("solve_t", false);
    s.shape_selectors = j.value("shapes", std::vector<std::string>{});
    s.subset = subset_from_name(j.value("subset", "all"));
    const std::string w = j.value("weights", "uniform");
    if (w == "mouth_heavy")
        s.weights = WeightPreset::MouthHeavy;
    else if (w == "uniform")
        s.weights = WeightPreset::Uniform;
    else
        throw FaceFitError("unknown weight preset: " + w);
    s.landmark_weight = j.value("landmark_weight", 1.0);
    s.edge_weight = j.value("edge_weight", 1.0);
    s.reg_lambda = j.value("reg_lambda", 0.0);
    s.tether_rigid = j.value("tether_rigid", false);
    s.prior_theta = j.value("prior_theta", s.prior_theta);
    s.prior_t = j.value("prior_t", s.prior_t);
    if (j.contains("solver"))
        s.solver = solver_from_json(j["solver"], s.solver);
    return s;
}

const char* smoothing_mode_name(SmoothingMode m)
{
    switch (m) {
    case SmoothingMode::Averaging: return "averaging";
    case SmoothingMode::SelfFlow: return "self_flow";
    case SmoothingMode::PlateFlow: return "plate_flow";
    case SmoothingMode::Hybrid: return "hybrid";
    }
    return "hybrid";
}

SmoothingMode smoothing_mode_from_name(const std::string& s)
{
    if (s == "averaging") return SmoothingMode::Averaging;
    if (s == "self_flow") return SmoothingMode::SelfFlow;
    if (s == "plate_flow") return SmoothingMode::PlateFlow;
    if (s == "hybrid") return SmoothingMode::Hybrid;
    throw FaceFitError("unknown smoothing mode: " + s);
}

json config_to_json(const SolveConfig& c)
{
    json j;
    j["format"] = "facefit-config-v1";
    j["seed"] = c.seed;
    j["background"] = vec3_to_json(c.background);
    j["landmark_backend"] = c.landmark_backend;
    j["blob"] = {{"amplitude", c.blob.amplitude}, {"sigma_color", c.blob.sigma_color}};
    j["detect"] = {{"beta", c.detect.beta}, {"min_peak", c.detect.min_peak}};
    j["bbox"] = {{"threshold", c.bbox.threshold}, {"margin", c.bbox.margin}};
    j["flow_backend"] = c.flow_backend;
    j["flow"] = {{"levels", c.flow.levels},
                 {"iterations", c.flow.iterations},
                 {"smoothness", c.flow.smoothness},
                 {"resolution", c.flow.resolution}};
    j["fiducials"] = {{"radius", c.fiducials.radius}, {"peak_alpha", c.fiducials.peak_alpha}};
    j["mouth_weight_factor"] = c.mouth_weight_factor;
    j["flow_mask_dilation"] = c.flow_mask_dilation;
    json rigid = json::array();
    for (const StageSpec& s : c.rigid_stages)
        rigid.push_back(stage_to_json(s));
    j["rigid_stages"] = rigid;
    json expr = json::array();
    for (const StageSpec& s : c.expression_stages)
        expr.push_back(stage_to_json(s));
    j["expression_stages"] = expr;
    j["reestimation_stage"] = stage_to_json(c.reestimation_stage);
    j["smoothing"] = {{"mode", smoothing_mode_name(c.smoothing.mode)},
                      {"window", json::array({c.smoothing.window[0], c.smoothing.window[1], c.smoothing.window[2]})},
                      {"sweeps", c.smoothing.sweeps},
                      {"prior_weight", c.smoothing.prior_weight},
                      {"gauss_seidel", c.smoothing.gauss_seidel},
                      {"solver", solver_to_json(c.smoothing.solver)}};
    j["infill"] = {{"sweeps", c.infill.sweeps},
                   {"prior_weight", c.infill.prior_weight},
                   {"solver", solver_to_json(c.infill.solver)}};
    return j;
}

SolveConfig config_from_json(const json& j)
{
    SolveConfig c;
    c.seed = j.value("seed", c.seed);
    if (j.contains("background"))
        c.background = vec3_from_json(j["background"]);
    c.landmark_backend = j.value("landmark_backend", c.landmark_backend);
    if (j.contains("blob")) {
        c.blob.amplitude = j["blob"].value("amplitude", c.blob.amplitude);
        c.blob.sigma_color = j["blob"].value("sigma_color", c.blob.sigma_color);
    }
    if (j.contains("detect")) {
        c.detect.beta = j["detect"].value("beta", c.detect.beta);
        c.detect.min_peak = j["detect"].value("min_peak", c.detect.min_peak);
    }
    if (j.contains("bbox")) {
        c.bbox.threshold = j["bbox"].value("threshold", c.bbox.threshold);
        c.bbox.margin = j["bbox"].value("margin", c.bbox.margin);
    }
    c.flow_backend = j.value("flow_backend", c.flow_backend);
    if (j.contains("flow")) {
        c.flow.levels = j["flow"].value("levels", c.flow.levels);
        c.flow.iterations = j["flow"].value("iterations", c.flow.iterations);
        c.flow.smoothness = j["flow"].value("smoothness", c.flow.smoothness);
        c.flow.resolution = j["flow"].value("resolution", c.flow.resolution);
    }
    if (j.contains("fiducials")) {
        c.fiducials.radius = j["fiducials"].value("radius", c.fiducials.radius);
        c.fiducials.peak_alpha = j["fiducials"].value("peak_alpha", c.fiducials.peak_alpha);
    }
    c.mouth_weight_factor = j.value("mouth_weight_factor", c.mouth_weight_factor);
    c.flow_mask_dilation = j.value("flow_mask_dilation", c.flow_mask_dilation);
    if (j.contains("rigid_stages")) {
        c.rigid_stages.clear();
        for (const json& s : j["rigid_stages"])
            c.rigid_stages.push_back(stage_from_json(s));
    }
    if (j.contains("expression_stages")) {
        c.expression_stages.clear();
        for (const json& s : j["expression_stages"])
            c.expression_stages.push_back(stage_from_json(s));
    }
    if (j.contains("reestimation_stage"))
        c.reestimation_stage = stage_from_json(j["reestimation_stage"]);
    if (j.contains("smoothing")) {
        const json& s = j["smoothing"];
        c.smoothing.mode = smoothing_mode_from_name(s.value("mode", "hybrid"));
        if (s.contains("window"))
            for (int k = 0; k < 3; ++k)
                c.smoothing.window[k] = s["window"].at(k).get<double>();
        c.smoothing.sweeps = s.value("sweeps", c.smoothing.sweeps);
        c.smoothing.prior_weight = s.value("prior_weight", c.smoothing.prior_weight);
        c.smoothing.gauss_seidel = s.value("gauss_seidel", c.smoothing.gauss_seidel);
        if (s.contains("solver"))
            c.smoothing.solver = solver_from_json(s["solver"], c.smoothing.solver);
    }
    if (j.contains("infill")) {
        const json& s = j["infill"];
        c.infill.sweeps = s.value("sweeps", c.infill.sweeps);
        c.infill.prior_weight = s.value("prior_weight", c.infill.prior_weight);
        if (s.contains("solver"))
            c.infill.solver = solver_from_json(s["solver"], c.infill.solver);
    }
    return c;
}

} // namespace

void save_rig(const std::string& path, const FaceRig& rig)
{
    rig.validate();
    json j;
    j["format"] = "facefit-rig-v1";
    j["vertices"] = points_to_json(rig.neutral_vertices);
    json tris = json::array();
    for (int f = 0; f < rig.triangle_count(); ++f)
        tris.push_back(json::array({rig.triangles(0, f), rig.triangles(1, f), rig.triangles(2, f)}));
    j["triangles"] = tris;
    json shapes = json::array();
    for (const BlendShape& s : rig.shapes) {
        json js;
        js["name"] = s.name;
        js["tag"] = tag_name(s.tag);
        js["kind"] = kind_name(s.kind);
        if (s.kind == ShapeKind::Delta)
            js["deltas"] = points_to_json(s.deltas);
        else
            js["scale"] = s.scale;
        shapes.push_back(js);
    }
    j["shapes"] = shapes;
    j["jaw"] = {{"pivot", vec3_to_json(rig.jaw_joint.pivot)}, {"axes", mat3_to_json(rig.jaw_joint.axes)}};
    j["skin_weights"] = vecx_to_json(rig.jaw_skin_weights);
    json lms = json::array();
    for (int i = 0; i < kNumLandmarks; ++i)
        lms.push_back(json{{"vertex", rig.landmark_vertices[i]}, {"group", group_name(rig.landmark_groups[i])}});
    j["landmarks"] = lms;
    write_json(path, j);
}

FaceRig load_rig(const std::string& path)
{
    const json j = load_json(path, "facefit-rig-v1");
    FaceRig rig;
    rig.neutral_vertices = points_from_json(j.at("vertices"));
    const json& tris = j.at("triangles");
    rig.triangles.resize(3, static_cast<int>(tris.size()));
    for (size_t f = 0; f < tris.size(); ++f)
        for (int k = 0; k < 3; ++k)
            rig.triangles(k, static_cast<int>(f)) = tris[f].at(k).get<int>();
    for (const json& js : j.at("shapes")) {
        BlendShape s;
        s.name = js.at("name").get<std::string>();
        s.tag = tag_from_name(js.at("tag").get<std::string>());
        s.kind = kind_from_name(js.at("kind").get<std::string>());
        if (s.kind == ShapeKind::Delta)
            s.deltas = points_from_json(js.at("deltas"));
        else
            s.scale = js.at("scale").get<double>();
        rig.shapes.push_back(std::move(s));
    }
    rig.jaw_joint.pivot = vec3_from_json(j.at("jaw").at("pivot"));
    rig.jaw_joint.axes = mat3_from_json(j.at("jaw").at("axes"));
    rig.jaw_skin_weights = vecx_from_json(j.at("skin_weights"));
    const json& lms = j.at("landmarks");
    if (lms.size() != kNumLandmarks)
        throw FaceFitError(path + ": rig must define exactly 68 landmarks");
    for (int i = 0; i < kNumLandmarks; ++i) {
        rig.landmark_vertices[i] = lms[i].at("vertex").get<int>();
        rig.landmark_groups[i] = group_from_name(lms[i].at("group").get<std::string>());
    }
    rig.validate();
    return rig;
}

void save_pose(const std::string& path, const PoseParams& pose)
{
    json j;
    j["format"] = "facefit-pose-v1";
    j["euler_convention"] = "intrinsic-xyz";
    j["theta"] = vec3_to_json(pose.theta);
    j["t"] = vec3_to_json(pose.t);
    j["w"] = vecx_to_json(pose.w);
    write_json(path, j);
}

PoseParams load_pose(const std::string& path)
{
    const json j = load_json(path, "facefit-pose-v1");
    if (j.value("euler_convention", "") != "intrinsic-xyz")
        throw FaceFitError(path + ": unsupported euler convention");
    PoseParams p;
    p.theta = vec3_from_json(j.at("theta"));
    p.t = vec3_from_json(j.at("t"));
    p.w = vecx_from_json(j.at("w"));
    return p;
}

void save_appearance(const std::string& path, const AppearanceModel& appearance)
{
    json j;
    j["format"] = "facefit-appearance-v1";
    j["albedo"] = points_to_json(appearance.albedo);
    json sh;
    const char* names[3] = {"r", "g", "b"};
    for (int c = 0; c < 3; ++c) {
        json a = json::array();
        for (int k = 0; k < 9; ++k)
            a.push_back(appearance.sh_coeffs(k, c));
        sh[names[c]] = a;
    }
    j["sh_coeffs"] = sh;
    write_json(path, j);
}

AppearanceModel load_appearance(const std::string& path)
{
    const json j = load_json(path, "facefit-appearance-v1");
    AppearanceModel m;
    m.albedo = points_from_json(j.at("albedo"));
    const char* names[3] = {"r", "g", "b"};
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 9; ++k)
            m.sh_coeffs(k, c) = j.at("sh_coeffs").at(names[c]).at(k).get<double>();
    return m;
}

std::string SequenceManifest::resolve(const std::string& relative) const
{
    if (relative.empty() || relative.front() == '/')
        return relative;
    return (std::filesystem::path(base_dir) / relative).string();
}

void SequenceManifest::validate() const
{
    if (cameras.empty())
        throw FaceFitError("manifest has no cameras");
    int last = -1;
    for (const FrameRecord& f : frames) {
        if (f.index <= last)
            throw FaceFitError("manifest frame indices must be strictly increasing");
        last = f.index;
        if (f.images.size() != cameras.size())
            throw FaceFitError("frame " + std::to_string(f.index) + " image count does not match cameras");
    }
}

void SequenceManifest::select_cameras(const std::vector<std::string>& names)
{
    std::vector<int> keep;
    for (const std::string& n : names) {
        int found = -1;
        for (int c = 0; c < static_cast<int>(cameras.size()); ++c)
            if (cameras[c].name == n)
                found = c;
        if (found < 0)
            throw FaceFitError("manifest has no camera named " + n);
        keep.push_back(found);
    }
    std::vector<Camera> cams;
    for (int c : keep)
        cams.push_back(cameras[c]);
    for (FrameRecord& f : frames) {
        std::vector<std::string> images;
        std::vector<std::optional<std::array<double, 4>>> bboxes;
        for (int c : keep) {
            images.push_back(f.images[c]);
            bboxes.push_back(c < static_cast<int>(f.bboxes.size()) ? f.bboxes[c] : std::nullopt);
        }
        f.images = std::move(images);
        f.bboxes = std::move(bboxes);
    }
    cameras = std::move(cams);
}

SequenceManifest load_manifest(const std::string& path)
{
    const json j = load_json(path, "facefit-manifest-v1");
    SequenceManifest m;
    m.base_dir = std::filesystem::path(path).parent_path().string();
    m.rig_path = j.at("rig").get<std::string>();
    m.appearance_path = j.value("appearance", "");
    m.fit_frame = j.value("fit_frame", 0);
    for (const json& c : j.at("cameras"))
        m.cameras.push_back(camera_from_json(c));
    for (const json& jf : j.at("frames")) {
        FrameRecord f;
        f.index = jf.at("index").get<int>();
        for (const json& im : jf.at("images"))
            f.images.push_back(im.get<std::string>());
        f.bboxes.assign(f.images.size(), std::nullopt);
        if (jf.contains("bboxes")) {
            const json& bb = jf["bboxes"];
            for (size_t c = 0; c < bb.size() && c < f.bboxes.size(); ++c) {
                if (!bb[c].is_null()) {
                    std::array<double, 4> box{};
                    for (int k = 0; k < 4; ++k)
                        box[k] = bb[c].at(k).get<double>();
                    f.bboxes[c] = box;
                }
            }
        }
        f.ground_truth = jf.value("ground_truth", "");
        m.frames.push_back(std::move(f));
    }
    m.validate();
    return m;
}

void save_manifest(const std::string& path, const SequenceManifest& manifest)
{
    manifest.validate();
    json j;
    j["format"] = "facefit-manifest-v1";
    j["rig"] = manifest.rig_path;
    if (!manifest.appearance_path.empty())
        j["appearance"] = manifest.appearance_path;
    j["fit_frame"] = manifest.fit_frame;
    json cams = json::array();
    for (const Camera& c : manifest.cameras)
        cams.push_back(camera_to_json(c));
    j["cameras"] = cams;
    json frames = json::array();
    for (const FrameRecord& f : manifest.frames) {
        json jf;
        jf["index"] = f.index;
        jf["images"] = f.images;
        bool any_bbox = false;
        json bb = json::array();
        for (const auto& b : f.bboxes) {
            if (b) {
                any_bbox = true;
                bb.push_back(json::array({(*b)[0], (*b)[1], (*b)[2], (*b)[3]}));
            } else {
                bb.push_back(nullptr);
            }
        }
        if (any_bbox)
            jf["bboxes"] = bb;
        if (!f.ground_truth.empty())
            jf["ground_truth"] = f.ground_truth;
        frames.push_back(jf);
    }
    j["frames"] = frames;
    write_json(path, j);
}

std::vector<FrameState> load_frames(const SequenceManifest& manifest, int frame_begin, int frame_end)
{
    std::vector<FrameState> out;
    for (const FrameRecord& rec : manifest.frames) {
        if (frame_begin >= 0 && rec.index < frame_begin)
            continue;
        if (frame_end >= 0 && rec.index > frame_end)
            continue;
        FrameState f;
        f.index = rec.index;
        for (size_t c = 0; c < rec.images.size(); ++c) {
            f.images.push_back(read_image(manifest.resolve(rec.images[c])));
            if (c < rec.bboxes.size() && rec.bboxes[c]) {
                BoundingBox box;
                box.min = {(*rec.bboxes[c])[0], (*rec.bboxes[c])[1]};
                box.max = {(*rec.bboxes[c])[2], (*rec.bboxes[c])[3]};
                f.bbox_overrides.push_back(box);
            } else {
                f.bbox_overrides.push_back(std::nullopt);
            }
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::string RunManifest::resolve(const std::string& relative) const
{
    if (relative.empty() || relative.front() == '/')
        return relative;
    return (std::filesystem::path(base_dir) / relative).string();
}

RunManifest load_run_manifest(const std::string& path)
{
    const json j = load_json(path, "facefit-run-v1");
    RunManifest m;
    m.base_dir = std::filesystem::path(path).parent_path().string();
    m.config_hash = j.at("reproducibility").at("config_hash").get<std::string>();
    m.seed = j.at("reproducibility").at("seed").get<std::uint64_t>();
    m.version = j.at("reproducibility").at("version").get<std::string>();
    for (const json& jf : j.at("frames")) {
        RunManifest::Entry e;
        e.index = jf.at("index").get<int>();
        e.status = frame_status_from_string(jf.at("status").get<std::string>());
        e.params_path = jf.value("params", "");
        m.frames.push_back(e);
    }
    return m;
}

void save_run_manifest(const std::string& path, const RunManifest& manifest)
{
    json j;
    j["format"] = "facefit-run-v1";
    j["reproducibility"] = {{"config_hash", manifest.config_hash},
                            {"seed", manifest.seed},
                            {"version", manifest.version}};
    json frames = json::array();
    for (const RunManifest::Entry& e : manifest.frames) {
        json jf;
        jf["index"] = e.index;
        jf["status"] = to_string(e.status);
        if (!e.params_path.empty())
            jf["params"] = e.params_path;
        frames.push_back(jf);
    }
    j["frames"] = frames;
    write_json(path, j);
}

SolveConfig load_config(const std::string& path)
{
    return config_from_json(load_json(path, "facefit-config-v1"));
}

void save_config(const std::string& path, const SolveConfig& config)
{
    write_json(path, config_to_json(config));
}

std::string config_hash(const SolveConfig& config)
{
    const std::string s = config_to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace facefit
