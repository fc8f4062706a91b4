/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/appearance_fit.cpp
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
#include "facefit/appearance_fit.h"

#include <set>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace facefit {

namespace {

struct CoveredPixel
{
    int y, x;
    int verts[3];
    double bary[3];
    Eigen::Matrix<double, 9, 1> basis; // SH basis of the interpolated normal
    Eigen::Vector3d target;
};

} // namespace

AppearanceModel fit_appearance(const Image& captured, const Camera& camera,
                               const MeshSurface& posed_surface, const AppearanceFitOptions& options)
{
    const FaceRig* rig = posed_surface.rig;
    if (rig == nullptr)
        throw FaceFitError("fit_appearance needs a surface with rig topology");
    const int n = posed_surface.vertex_count();
    if (captured.height() != camera.height || captured.width() != camera.width)
        throw FaceFitError("captured image size does not match camera");

    // Coverage and geometry come from a neutral-appearance render; only the
    // buffers matter here, the shaded values are ignored.
    AppearanceModel probe = AppearanceModel::constant(n, options.initial_albedo);
    RenderOptions ropt = options.render;
    ropt.fiducials.reset();
    const RenderResult rr = rasterize(camera, posed_surface, probe, ropt);

    // Interpolated normals per covered pixel (recomputed as in the shading pass).
    Eigen::Matrix3Xd normals = Eigen::Matrix3Xd::Zero(3, n);
    for (int f = 0; f < rig->triangle_count(); ++f) {
        const int i0 = rig->triangles(0, f), i1 = rig->triangles(1, f), i2 = rig->triangles(2, f);
        const Eigen::Vector3d c = (posed_surface.vertices.col(i1) - posed_surface.vertices.col(i0))
                                      .cross(posed_surface.vertices.col(i2) - posed_surface.vertices.col(i0));
        normals.col(i0) += c;
        normals.col(i1) += c;
        normals.col(i2) += c;
    }
    for (int v = 0; v < n; ++v) {
        const double len = normals.col(v).norm();
        normals.col(v) = len < 1e-14 ? Eigen::Vector3d(0, 0, 1) : Eigen::Vector3d(normals.col(v) / len);
    }

    std::vector<CoveredPixel> pixels;
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const int f = rr.triangle_id(y, x);
            if (f < 0)
                continue;
            if (options.exclude_mask &&
                (*options.exclude_mask)[static_cast<size_t>(y) * camera.width + x] != 0)
                continue;
            CoveredPixel p;
            p.y = y;
            p.x = x;
            for (int k = 0; k < 3; ++k) {
                p.verts[k] = rig->triangles(k, f);
                p.bary[k] = rr.barycentric.at(y, x, k);
            }
            Eigen::Vector3d nt = p.bary[0] * normals.col(p.verts[0]) + p.bary[1] * normals.col(p.verts[1]) +
                                 p.bary[2] * normals.col(p.verts[2]);
            const double len = nt.norm();
            nt = len < 1e-14 ? Eigen::Vector3d(0, 0, 1) : Eigen::Vector3d(nt / len);
            p.basis = sh_basis(nt);
            p.target = captured.rgb(p.y, p.x);
            pixels.push_back(p);
        }
    }
    if (static_cast<int>(pixels.size()) < options.min_covered_pixels)
        throw FaceFitError("fit_appearance: insufficient covered pixels (" +
                           std::to_string(pixels.size()) + ")");

    // Mesh edges for the albedo smoothness term.
    std::set<std::pair<int, int>> edge_set;
    for (int f = 0; f < rig->triangle_count(); ++f) {
        for (int k = 0; k < 3; ++k) {
            int a = rig->triangles(k, f), b = rig->triangles((k + 1) % 3, f);
            if (a > b)
                std::swap(a, b);
            edge_set.insert({a, b});
        }
    }

    AppearanceModel model;
    model.albedo.resize(3, n);
    model.albedo.colwise() = options.initial_albedo;
    model.sh_coeffs.setZero();

    for (int it = 0; it < options.iterations; ++it) {
        // Stage A: albedo fixed, SH linear per channel.
        for (int ch = 0; ch < 3; ++ch) {
            Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
            Eigen::Matrix<double, 9, 1> atb = Eigen::Matrix<double, 9, 1>::Zero();
            for (const CoveredPixel& p : pixels) {
                double alb = 0.0;
                for (int k = 0; k < 3; ++k)
                    alb += p.bary[k] * model.albedo(ch, p.verts[k]);
                const Eigen::Matrix<double, 9, 1> row = alb * p.basis;
                ata.noalias() += row * row.transpose();
                atb.noalias() += row * p.target[ch];
            }
            ata.diagonal().array() += 1e-12;
            model.sh_coeffs.col(ch) = ata.ldlt().solve(atb);
        }

        // Stage B: SH fixed, per-vertex albedo linear per channel with a
        // neighbor-smoothness regularizer.
        for (int ch = 0; ch < 3; ++ch) {
            std::vector<Eigen::Triplet<double>> trips;
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
            for (const CoveredPixel& p : pixels) {
                const double light = model.sh_coeffs.col(ch).dot(p.basis);
                // Residual: sum_k b_k a_k * light - target.
                for (int k = 0; k < 3; ++k) {
                    const double jk = p.bary[k] * light;
                    rhs[p.verts[k]] += jk * p.target[ch];
                    for (int l = 0; l < 3; ++l)
                        trips.emplace_back(p.verts[k], p.verts[l], jk * p.bary[l] * light);
                }
            }
            const double lam = options.albedo_smoothness;
            for (const auto& [a, b] : edge_set) {
                trips.emplace_back(a, a, lam);
                trips.emplace_back(b, b, lam);
                trips.emplace_back(a, b, -lam);
                trips.emplace_back(b, a, -lam);
            }
            for (int v = 0; v < n; ++v)
                trips.emplace_back(v, v, options.albedo_anchor);
            Eigen::SparseMatrix<double> ata(n, n);
            ata.setFromTriplets(trips.begin(), trips.end());
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(ata);
            if (solver.info() != Eigen::Success)
                throw FaceFitError("fit_appearance: albedo normal equations not SPD");
            Eigen::VectorXd a = solver.solve(rhs);
            for (int v = 0; v < n; ++v)
                model.albedo(ch, v) = std::clamp(a[v], 0.0, 1.0);
        }
    }
    return model;
}

} // namespace facefit
