/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/scenario.cpp
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
#include "facefit/scenario.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "facefit/face_model.h"
#include "facefit/feature_backend.h"
#include "facefit/image_io.h"
#include "facefit/rasterizer.h"

namespace facefit {

namespace {

constexpr double kDeg = M_PI / 180.0;

struct HeadGrid
{
    int lat = 36; // polar segments (from +y)
    int lon = 48; // azimuth segments (0 faces +z)
    double rx = 0.080, ry = 0.105, rz = 0.090;

    Eigen::Vector3d direction(double phi_deg, double lam_deg) const
    {
        const double phi = phi_deg * kDeg, lam = lam_deg * kDeg;
        return {std::sin(phi) * std::sin(lam), std::cos(phi), std::sin(phi) * std::cos(lam)};
    }
    Eigen::Vector3d position(double phi_deg, double lam_deg) const
    {
        const Eigen::Vector3d d = direction(phi_deg, lam_deg);
        return {rx * d.x(), ry * d.y(), rz * d.z()};
    }
};

double smoothstep(double x, double e0, double e1)
{
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Spherical parameters (phi from +y, lambda from +z) of a unit direction.
void to_angles(const Eigen::Vector3d& d, double& phi_deg, double& lam_deg)
{
    phi_deg = std::acos(std::clamp(d.y(), -1.0, 1.0)) / kDeg;
    lam_deg = std::atan2(d.x(), d.z()) / kDeg;
}

double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b)
{
    return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) / kDeg;
}

// The 68-point layout in (phi, lambda) degrees, iBUG ordering: jaw contour,
// brows, nose, eyes, outer lip, inner lip.
std::vector<Eigen::Vector2d> landmark_layout()
{
    std::vector<Eigen::Vector2d> out; // (phi, lambda)
    for (int k = 0; k < 17; ++k) {
        const double s = (k - 8) / 8.0;
        out.emplace_back(152.0 - 54.0 * std::pow(std::abs(s), 1.2), 75.0 * s);
    }
    for (int k = 0; k < 5; ++k)
        out.emplace_back(60.0, -45.0 + 8.75 * k);
    for (int k = 0; k < 5; ++k)
        out.emplace_back(60.0, 10.0 + 8.75 * k);
    const double bridge[4] = {68.0, 78.0, 88.0, 96.0};
    for (double p : bridge)
        out.emplace_back(p, 0.0);
    for (int k = 0; k < 5; ++k)
        out.emplace_back(102.0, -14.0 + 7.0 * k);
    const auto eye = [&](double cx) {
        for (int k = 0; k < 6; ++k) {
            const double a = (180.0 - 60.0 * k) * kDeg;
            out.emplace_back(72.0 - 5.0 * std::sin(a), cx + 9.0 * std::cos(a));
        }
    };
    eye(-26.0);
    eye(26.0);
    for (int k = 0; k < 12; ++k) {
        const double a = (180.0 - 30.0 * k) * kDeg;
        out.emplace_back(122.0 - 10.0 * std::sin(a), 21.0 * std::cos(a));
    }
    for (int k = 0; k < 8; ++k) {
        const double a = (180.0 - 45.0 * k) * kDeg;
        out.emplace_back(122.0 - 5.5 * std::sin(a), 13.0 * std::cos(a));
    }
    return out;
}

} // namespace

FaceRig make_example_head()
{
    const HeadGrid grid;
    FaceRig rig;

    // UV-sphere vertices: poles plus (lat-1) rings of lon vertices.
    const int rings = grid.lat - 1;
    const int n = rings * grid.lon + 2;
    rig.neutral_vertices.resize(3, n);
    rig.neutral_vertices.col(0) = grid.position(0.0, 0.0); // top pole
    for (int i = 0; i < rings; ++i) {
        const double phi = 180.0 * (i + 1) / grid.lat;
        for (int j = 0; j < grid.lon; ++j) {
            const double lam = -180.0 + 360.0 * j / grid.lon;
            rig.neutral_vertices.col(1 + i * grid.lon + j) = grid.position(phi, lam);
        }
    }
    rig.neutral_vertices.col(n - 1) = grid.position(180.0, 0.0); // bottom pole

    std::vector<std::array<int, 3>> tris;
    const auto ring_vertex = [&](int ring, int j) { return 1 + ring * grid.lon + (j % grid.lon); };
    for (int j = 0; j < grid.lon; ++j)
        tris.push_back({0, ring_vertex(0, j + 1), ring_vertex(0, j)});
    for (int i = 0; i + 1 < rings; ++i) {
        for (int j = 0; j < grid.lon; ++j) {
            const int a = ring_vertex(i, j), b = ring_vertex(i, j + 1);
            const int c = ring_vertex(i + 1, j), d = ring_vertex(i + 1, j + 1);
            tris.push_back({a, b, c});
            tris.push_back({b, d, c});
        }
    }
    for (int j = 0; j < grid.lon; ++j)
        tris.push_back({n - 1, ring_vertex(rings - 1, j), ring_vertex(rings - 1, j + 1)});
    rig.triangles.resize(3, static_cast<int>(tris.size()));
    for (size_t f = 0; f < tris.size(); ++f)
        for (int k = 0; k < 3; ++k)
            rig.triangles(k, static_cast<int>(f)) = tris[f][k];

    // Per-vertex spherical angles and local tangent frame.
    std::vector<double> phi(n), lam(n);
    Eigen::Matrix3Xd radial(3, n), tan_phi(3, n), tan_lam(3, n);
    for (int v = 0; v < n; ++v) {
        const Eigen::Vector3d p = rig.neutral_vertices.col(v);
        const Eigen::Vector3d d(p.x() / grid.rx, p.y() / grid.ry, p.z() / grid.rz);
        to_angles(d.normalized(), phi[v], lam[v]);
        radial.col(v) = d.normalized();
        // Tangents of the parametric sphere (phi increases downward).
        const double ph = phi[v] * kDeg, lm = lam[v] * kDeg;
        tan_phi.col(v) = Eigen::Vector3d(std::cos(ph) * std::sin(lm), -std::sin(ph), std::cos(ph) * std::cos(lm));
        tan_lam.col(v) = Eigen::Vector3d(std::cos(lm), 0.0, -std::sin(lm));
    }

    // Jaw: hinge slightly behind and below the center, identity axes.
    rig.jaw_joint.pivot = {0.0, -0.010, -0.030};
    rig.jaw_joint.axes = Eigen::Matrix3d::Identity();
    rig.jaw_skin_weights.resize(n);
    for (int v = 0; v < n; ++v)
        rig.jaw_skin_weights[v] =
            smoothstep(phi[v], 118.0, 132.0) * (1.0 - smoothstep(std::abs(lam[v]), 70.0, 95.0));

    const auto jaw_shape = [](const char* name, ShapeKind kind, double scale) {
        BlendShape s;
        s.name = name;
        s.tag = ShapeTag::Jaw;
        s.kind = kind;
        s.scale = scale;
        return s;
    };
    rig.shapes.push_back(jaw_shape("jaw_open", ShapeKind::JawRx, 0.30));
    rig.shapes.push_back(jaw_shape("jaw_side", ShapeKind::JawRy, 0.12));
    rig.shapes.push_back(jaw_shape("jaw_twist", ShapeKind::JawRz, 0.08));
    rig.shapes.push_back(jaw_shape("jaw_shift_x", ShapeKind::JawTx, 0.008));
    rig.shapes.push_back(jaw_shape("jaw_shift_y", ShapeKind::JawTy, 0.008));
    rig.shapes.push_back(jaw_shape("jaw_thrust", ShapeKind::JawTz, 0.008));

    const auto blob = [&](int v, double phi0, double lam0, double sigma_deg = 10.0) {
        const Eigen::Vector3d c = grid.direction(phi0, lam0);
        const double ang = angle_between_deg(radial.col(v), c);
        return std::exp(-0.5 * ang * ang / (sigma_deg * sigma_deg));
    };
    const auto make_delta = [&](const char* name, ShapeTag tag, auto&& field) {
        BlendShape s;
        s.name = name;
        s.tag = tag;
        s.kind = ShapeKind::Delta;
        s.deltas = Eigen::Matrix3Xd::Zero(3, n);
        for (int v = 0; v < n; ++v)
            s.deltas.col(v) = field(v);
        return s;
    };
    rig.shapes.push_back(make_delta("mouth_smile", ShapeTag::Mouth, [&](int v) -> Eigen::Vector3d {
        const double gl = blob(v, 120.0, -24.0), gr = blob(v, 120.0, 24.0);
        return gl * (-0.010 * tan_lam.col(v) - 0.008 * tan_phi.col(v)) +
               gr * (0.010 * tan_lam.col(v) - 0.008 * tan_phi.col(v));
    }));
    rig.shapes.push_back(make_delta("mouth_pucker", ShapeTag::Mouth, [&](int v) -> Eigen::Vector3d {
        const double g = blob(v, 122.0, 0.0, 14.0);
        const double side = lam[v] >= 0.0 ? 1.0 : -1.0;
        return g * (0.008 * radial.col(v) - 0.008 * side * tan_lam.col(v));
    }));
    rig.shapes.push_back(make_delta("brow_raise", ShapeTag::Other, [&](int v) -> Eigen::Vector3d {
        const double g = blob(v, 60.0, -27.0) + blob(v, 60.0, 27.0);
        return g * (-0.010) * tan_phi.col(v);
    }));
    rig.shapes.push_back(make_delta("cheek_puff", ShapeTag::Other, [&](int v) -> Eigen::Vector3d {
        const double g = blob(v, 105.0, -40.0, 12.0) + blob(v, 105.0, 40.0, 12.0);
        return g * 0.010 * radial.col(v);
    }));

    // Landmarks: nearest distinct vertex per layout target.
    const std::vector<Eigen::Vector2d> layout = landmark_layout();
    std::vector<bool> taken(n, false);
    for (int i = 0; i < kNumLandmarks; ++i) {
        const Eigen::Vector3d target = grid.direction(layout[i][0], layout[i][1]);
        int best = -1;
        double best_ang = 1e30;
        for (int v = 0; v < n; ++v) {
            if (taken[v])
                continue;
            const double ang = angle_between_deg(radial.col(v), target);
            if (ang < best_ang) {
                best_ang = ang;
                best = v;
            }
        }
        taken[best] = true;
        rig.landmark_vertices[i] = best;
        rig.landmark_groups[i] = i <= 16 ? LandmarkGroup::Jaw
                                         : (i >= 48 ? LandmarkGroup::Mouth : LandmarkGroup::Other);
    }

    rig.validate();
    return rig;
}

AppearanceModel make_example_appearance(const FaceRig& rig)
{
    const HeadGrid grid;
    const int n = rig.vertex_count();
    AppearanceModel m;
    m.albedo.resize(3, n);
    for (int v = 0; v < n; ++v) {
        const Eigen::Vector3d p = rig.neutral_vertices.col(v);
        const Eigen::Vector3d d =
            Eigen::Vector3d(p.x() / grid.rx, p.y() / grid.ry, p.z() / grid.rz).normalized();
        double phi, lam;
        to_angles(d, phi, lam);
        Eigen::Vector3d albedo(0.78, 0.62, 0.52);
        const auto blob = [&](double phi0, double lam0, double sigma = 10.0) {
            const double ang = angle_between_deg(d, grid.direction(phi0, lam0));
            return std::exp(-0.5 * ang * ang / (sigma * sigma));
        };
        const double lips = blob(122.0, 0.0, 12.0);
        albedo = (1.0 - lips) * albedo + lips * Eigen::Vector3d(0.70, 0.38, 0.38);
        const double brows = std::min(1.0, blob(58.0, -27.0, 6.0) + blob(58.0, 27.0, 6.0));
        albedo = (1.0 - brows) * albedo + brows * Eigen::Vector3d(0.42, 0.32, 0.26);
        const double lam_r = lam * kDeg, phi_r = phi * kDeg;
        albedo[0] += 0.04 * std::sin(2.1 * lam_r) * std::sin(3.3 * phi_r);
        albedo[1] += 0.03 * std::cos(1.7 * lam_r) * std::sin(2.5 * phi_r);
        albedo[2] += 0.03 * std::sin(2.6 * lam_r + 0.8) * std::cos(1.9 * phi_r);
        m.albedo.col(v) = albedo.cwiseMax(0.0).cwiseMin(1.0);
    }
    // Frontal key light with a mild side and top balance.
    m.sh_coeffs.setZero();
    m.sh_coeffs.row(0) << 2.60, 2.58, 2.52; // ambient
    m.sh_coeffs.row(1) << -0.20, -0.20, -0.18; // y
    m.sh_coeffs.row(2) << 0.60, 0.58, 0.55; // z (toward the camera)
    m.sh_coeffs.row(3) << 0.15, 0.14, 0.13; // x
    m.sh_coeffs.row(6) << 0.08, 0.08, 0.07;
    return m;
}

Camera make_default_camera(const std::string& name, int width, int height)
{
    return make_orbit_camera(name, 0.0, 0.65, width, height);
}

Camera make_orbit_camera(const std::string& name, double azimuth_deg, double distance, int width,
                         int height)
{
    Camera c;
    c.name = name;
    c.width = width;
    c.height = height;
    c.fx = c.fy = 560.0 * width / 256.0;
    c.cx = width / 2.0;
    c.cy = height / 2.0;
    const double a = azimuth_deg * kDeg;
    const Eigen::Vector3d pos(distance * std::sin(a), 0.0, distance * std::cos(a));
    const Eigen::Vector3d forward = (-pos).normalized();
    const Eigen::Vector3d right = forward.cross(Eigen::Vector3d(0, 1, 0)).normalized();
    const Eigen::Vector3d down = forward.cross(right);
    c.rotation.row(0) = right;
    c.rotation.row(1) = down;
    c.rotation.row(2) = forward;
    c.translation = -c.rotation * pos;
    return c;
}

void SyntheticScenario::validate() const
{
    if (trajectory.empty())
        throw FaceFitError("scenario trajectory must have at least one frame");
    if (cameras.empty())
        throw FaceFitError("scenario needs at least one camera");
    if (!(noise_sigma >= 0.0))
        throw FaceFitError("noise sigma must be non-negative");
    if (image_format != "npy" && image_format != "png")
        throw FaceFitError("scenario image format must be npy or png");
}

SyntheticScenario load_scenario(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw FaceFitError("cannot open scenario: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FaceFitError("malformed scenario json: " + std::string(e.what()));
    }
    if (j.value("format", "") != "facefit-scenario-v1")
        throw FaceFitError(path + ": expected facefit-scenario-v1");
    SyntheticScenario s;
    s.rig = j.value("rig", s.rig);
    s.appearance = j.value("appearance", s.appearance);
    if (j.contains("cameras")) {
        s.cameras.clear();
        for (const auto& jc : j["cameras"]) {
            if (jc.contains("orbit")) {
                s.cameras.push_back(make_orbit_camera(jc.value("name", "cam"),
                                                      jc["orbit"].value("azimuth_deg", 0.0),
                                                      jc["orbit"].value("distance", 0.65),
                                                      jc.value("width", 256), jc.value("height", 192)));
            } else {
                Camera c;
                c.name = jc.at("name").get<std::string>();
                c.width = jc.at("width").get<int>();
                c.height = jc.at("height").get<int>();
                c.fx = jc.at("fx").get<double>();
                c.fy = jc.at("fy").get<double>();
                c.cx = jc.at("cx").get<double>();
                c.cy = jc.at("cy").get<double>();
                for (int r = 0; r < 3; ++r)
                    for (int k = 0; k < 3; ++k)
                        c.rotation(r, k) = jc.at("rotation").at(r).at(k).get<double>();
                for (int k = 0; k < 3; ++k)
                    c.translation[k] = jc.at("translation").at(k).get<double>();
                s.cameras.push_back(c);
            }
        }
    }
    for (const auto& jp : j.at("trajectory")) {
        PoseParams p;
        for (int k = 0; k < 3; ++k) {
            p.theta[k] = jp.at("theta").at(k).get<double>();
            p.t[k] = jp.at("t").at(k).get<double>();
        }
        const auto& wj = jp.at("w");
        p.w.resize(wj.size());
        for (size_t k = 0; k < wj.size(); ++k)
            p.w[static_cast<int>(k)] = wj[k].get<double>();
        s.trajectory.push_back(p);
    }
    s.noise_sigma = j.value("noise_sigma", 0.0);
    s.motion_blur = j.value("motion_blur", false);
    s.fiducials = j.value("fiducials", true);
    s.fiducial_radius = j.value("fiducial_radius", 4.0);
    s.fiducial_alpha = j.value("fiducial_alpha", 0.95);
    s.seed = j.value("seed", std::uint64_t{1});
    s.image_format = j.value("image_format", "npy");
    s.validate();
    return s;
}

void save_scenario(const std::string& path, const SyntheticScenario& s)
{
    s.validate();
    nlohmann::json j;
    j["format"] = "facefit-scenario-v1";
    j["rig"] = s.rig;
    j["appearance"] = s.appearance;
    nlohmann::json cams = nlohmann::json::array();
    for (const Camera& c : s.cameras) {
        nlohmann::json jc;
        jc["name"] = c.name;
        jc["width"] = c.width;
        jc["height"] = c.height;
        jc["fx"] = c.fx;
        jc["fy"] = c.fy;
        jc["cx"] = c.cx;
        jc["cy"] = c.cy;
        nlohmann::json rot = nlohmann::json::array();
        for (int r = 0; r < 3; ++r)
            rot.push_back(nlohmann::json::array({c.rotation(r, 0), c.rotation(r, 1), c.rotation(r, 2)}));
        jc["rotation"] = rot;
        jc["translation"] = nlohmann::json::array({c.translation[0], c.translation[1], c.translation[2]});
        cams.push_back(jc);
    }
    j["cameras"] = cams;
    nlohmann::json traj = nlohmann::json::array();
    for (const PoseParams& p : s.trajectory) {
        nlohmann::json jp;
        jp["theta"] = nlohmann::json::array({p.theta[0], p.theta[1], p.theta[2]});
        jp["t"] = nlohmann::json::array({p.t[0], p.t[1], p.t[2]});
        nlohmann::json w = nlohmann::json::array();
        for (int k = 0; k < p.w.size(); ++k)
            w.push_back(p.w[k]);
        jp["w"] = w;
        traj.push_back(jp);
    }
    j["trajectory"] = traj;
    j["noise_sigma"] = s.noise_sigma;
    j["motion_blur"] = s.motion_blur;
    j["fiducials"] = s.fiducials;
    j["fiducial_radius"] = s.fiducial_radius;
    j["fiducial_alpha"] = s.fiducial_alpha;
    j["seed"] = s.seed;
    j["image_format"] = s.image_format;
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream f(path);
    f << j.dump(1, '\t') << "\n";
}

namespace {

PoseParams lerp_pose(const PoseParams& a, const PoseParams& b, double t)
{
    PoseParams out;
    out.t = (1.0 - t) * a.t + t * b.t;
    out.w = (1.0 - t) * a.w + t * b.w;
    const Eigen::Quaterniond q = euler_to_quaternion(a.theta).slerp(t, euler_to_quaternion(b.theta));
    out.theta = quaternion_to_euler_near(q, a.theta);
    return out;
}

void add_noise(Image& img, double sigma, std::uint64_t seed)
{
    if (sigma <= 0.0)
        return;
    std::mt19937_64 rng(seed);
    // Box-Muller on the raw engine keeps the stream platform-independent.
    const auto uniform = [&rng]() {
        return (rng() >> 11) * (1.0 / 9007199254740992.0); // 53-bit mantissa in [0, 1)
    };
    size_t i = 0;
    const size_t count = img.size();
    while (i < count) {
        const double u1 = std::max(uniform(), 1e-300);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        img.data()[i] = std::clamp(img.data()[i] + sigma * r * std::cos(a), 0.0, 1.0);
        ++i;
        if (i < count) {
            img.data()[i] = std::clamp(img.data()[i] + sigma * r * std::sin(a), 0.0, 1.0);
            ++i;
        }
    }
}

} // namespace

SequenceManifest generate_synthetic(const SyntheticScenario& scenario, const std::string& output_dir)
{
    scenario.validate();
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(output_dir) / "frames");
    fs::create_directories(fs::path(output_dir) / "gt");

    FaceRig rig;
    if (scenario.rig == "preset:example_head")
        rig = make_example_head();
    else
        rig = load_rig(scenario.rig);
    AppearanceModel appearance;
    if (scenario.appearance == "preset:skin")
        appearance = make_example_appearance(rig);
    else
        appearance = load_appearance(scenario.appearance);

    save_rig((fs::path(output_dir) / "rig.json").string(), rig);
    save_appearance((fs::path(output_dir) / "appearance.json").string(), appearance);

    RenderOptions ropt;
    if (scenario.fiducials) {
        FiducialConfig fc;
        fc.vertex_indices.assign(rig.landmark_vertices.begin(), rig.landmark_vertices.end());
        fc.colors = fiducial_palette(kNumLandmarks);
        fc.radius = scenario.fiducial_radius;
        fc.peak_alpha = scenario.fiducial_alpha;
        ropt.fiducials = fc;
    }

    const auto render_pose = [&](const PoseParams& pose, const Camera& cam) {
        const MeshSurface posed = apply_rigid(evaluate_surface(rig, pose.w), pose.theta, pose.t);
        return rasterize(cam, posed, appearance, ropt).image;
    };

    SequenceManifest manifest;
    manifest.base_dir = output_dir;
    manifest.rig_path = "rig.json";
    manifest.appearance_path = "appearance.json";
    manifest.fit_frame = 0;
    manifest.cameras = scenario.cameras;

    const int nframes = static_cast<int>(scenario.trajectory.size());
    for (int f = 0; f < nframes; ++f) {
        FrameRecord rec;
        rec.index = f;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "gt/frame_%04d.pose.json", f);
        rec.ground_truth = buf;
        save_pose((fs::path(output_dir) / buf).string(), scenario.trajectory[f]);
        for (size_t c = 0; c < scenario.cameras.size(); ++c) {
            const Camera& cam = scenario.cameras[c];
            Image img = render_pose(scenario.trajectory[f], cam);
            if (scenario.motion_blur && nframes > 1) {
                // Cheap shutter approximation: average with half-step poses.
                const PoseParams& cur = scenario.trajectory[f];
                Image acc = img;
                int taps = 1;
                if (f > 0) {
                    const Image prev = render_pose(lerp_pose(cur, scenario.trajectory[f - 1], 0.5), cam);
                    for (size_t i = 0; i < acc.size(); ++i)
                        acc.data()[i] += prev.data()[i];
                    ++taps;
                }
                if (f + 1 < nframes) {
                    const Image next = render_pose(lerp_pose(cur, scenario.trajectory[f + 1], 0.5), cam);
                    for (size_t i = 0; i < acc.size(); ++i)
                        acc.data()[i] += next.data()[i];
                    ++taps;
                }
                for (size_t i = 0; i < acc.size(); ++i)
                    acc.data()[i] /= taps;
                img = std::move(acc);
            }
            add_noise(img, scenario.noise_sigma,
                      splitmix64(scenario.seed ^ splitmix64(static_cast<std::uint64_t>(f) * 131 + c)));
            std::snprintf(buf, sizeof(buf), "frames/frame_%04d_%s.%s", f, cam.name.c_str(),
                          scenario.image_format.c_str());
            write_image((fs::path(output_dir) / buf).string(), img);
            rec.images.push_back(buf);
        }
        rec.bboxes.assign(rec.images.size(), std::nullopt);
        manifest.frames.push_back(std::move(rec));
    }
    save_manifest((fs::path(output_dir) / "manifest.json").string(), manifest);
    return manifest;
}

} // namespace facefit
