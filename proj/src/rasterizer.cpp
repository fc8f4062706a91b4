/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/rasterizer.cpp
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
#include "facefit/rasterizer.h"

#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/Geometry>

namespace facefit {

namespace {

inline double cross2(const Eigen::Vector2d& u, const Eigen::Vector2d& v)
{
    return u.x() * v.y() - u.y() * v.x();
}

inline Eigen::Vector2d perp(const Eigen::Vector2d& v) { return {v.y(), -v.x()}; }

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

struct VertexNormals
{
    Eigen::Matrix3Xd normals;     // unit
    Eigen::VectorXd inv_lengths;  // 1/|m_v| of the unnormalized normal
};

VertexNormals smooth_normals(const FaceRig& rig, const Eigen::Matrix3Xd& verts)
{
    const int n = static_cast<int>(verts.cols());
    Eigen::Matrix3Xd m = Eigen::Matrix3Xd::Zero(3, n);
    for (int f = 0; f < rig.triangle_count(); ++f) {
        const int i0 = rig.triangles(0, f), i1 = rig.triangles(1, f), i2 = rig.triangles(2, f);
        const Eigen::Vector3d c =
            (verts.col(i1) - verts.col(i0)).cross(verts.col(i2) - verts.col(i0));
        m.col(i0) += c;
        m.col(i1) += c;
        m.col(i2) += c;
    }
    VertexNormals out;
    out.normals.resize(3, n);
    out.inv_lengths.resize(n);
    for (int v = 0; v < n; ++v) {
        const double len = m.col(v).norm();
        if (len < 1e-14) {
            out.normals.col(v) = Eigen::Vector3d(0, 0, 1);
            out.inv_lengths[v] = 0.0;
        } else {
            out.normals.col(v) = m.col(v) / len;
            out.inv_lengths[v] = 1.0 / len;
        }
    }
    return out;
}

// d m_v / d x_u accumulated over incident faces, keyed per vertex.
using RingDerivs = std::vector<std::vector<std::pair<int, Eigen::Matrix3d>>>;

RingDerivs normal_field_derivatives(const FaceRig& rig, const Eigen::Matrix3Xd& verts)
{
    const int n = static_cast<int>(verts.cols());
    RingDerivs out(n);
    auto add = [&out](int v, int u, const Eigen::Matrix3d& d) {
        auto& list = out[v];
        for (auto& e : list) {
            if (e.first == u) {
                e.second += d;
                return;
            }
        }
        list.emplace_back(u, d);
    };
    for (int f = 0; f < rig.triangle_count(); ++f) {
        const int i[3] = {rig.triangles(0, f), rig.triangles(1, f), rig.triangles(2, f)};
        const Eigen::Vector3d p = verts.col(i[0]), q = verts.col(i[1]), r = verts.col(i[2]);
        const Eigen::Matrix3d d[3] = {skew(r - q), skew(p - r), skew(q - p)};
        for (int v = 0; v < 3; ++v)
            for (int u = 0; u < 3; ++u)
                add(i[v], i[u], d[u]);
    }
    return out;
}

struct SplatProfile
{
    double alpha = 0.0;
    Eigen::Vector2d d_center = Eigen::Vector2d::Zero(); // d alpha / d center
};

// Disk with a constant-alpha core and a C^1 smoothstep rim over the outer
// quarter of the radius. The flat core keeps the disk color pure (rim color
// mixtures are what confuse the hue-gated landmark backend), while the rim
// carries the derivative that moves the disk with its vertex.
SplatProfile splat_alpha(const Eigen::Vector2d& pixel, const Eigen::Vector2d& center,
                         double radius, double peak)
{
    SplatProfile out;
    const Eigen::Vector2d diff = pixel - center;
    const double d2 = diff.squaredNorm();
    if (d2 >= radius * radius)
        return out;
    const double d = std::sqrt(d2);
    const double rim = 0.25 * radius;
    if (d <= radius - rim) {
        out.alpha = peak;
        return out;
    }
    const double u = (radius - d) / rim; // in (0, 1)
    out.alpha = peak * u * u * (3.0 - 2.0 * u);
    const double dalpha_dd = -peak * 6.0 * u * (1.0 - u) / rim;
    out.d_center = dalpha_dd * (-diff / d);
    return out;
}

} // namespace

RenderResult rasterize(const Camera& camera, const MeshSurface& surface,
                       const AppearanceModel& appearance, const RenderOptions& options)
{
    camera.validate();
    const FaceRig* rig = surface.rig;
    const int n = surface.vertex_count();
    if (appearance.albedo.cols() != n)
        throw FaceFitError("appearance vertex count does not match surface");
    const int W = camera.width, H = camera.height;

    RenderResult res;
    res.options = options;
    res.image = Image(H, W, 3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            res.image.set_rgb(y, x, options.background);
    res.triangle_id = Eigen::ArrayXXi::Constant(H, W, -1);
    res.barycentric = Image(H, W, 3);
    res.depth = Eigen::ArrayXXd::Constant(H, W, std::numeric_limits<double>::infinity());
    res.boundary.assign(static_cast<size_t>(H) * W, 0);

    std::vector<Projection> proj(n);
    for (int v = 0; v < n; ++v)
        proj[v] = project(camera, surface.vertices.col(v), options.near_plane);

    const int ntris = rig ? rig->triangle_count() : 0;
    for (int f = 0; f < ntris; ++f) {
        const int i0 = rig->triangles(0, f), i1 = rig->triangles(1, f), i2 = rig->triangles(2, f);
        if (!proj[i0].valid || !proj[i1].valid || !proj[i2].valid)
            continue;
        const Eigen::Vector2d p1 = proj[i0].pixel, p2 = proj[i1].pixel, p3 = proj[i2].pixel;
        const double A = cross2(p2 - p1, p3 - p1);
        if (std::abs(A) < 1e-12)
            continue; // degenerate in screen space
        const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({p1.x(), p2.x(), p3.x()}))));
        const int x1 = std::min(W - 1, static_cast<int>(std::floor(std::max({p1.x(), p2.x(), p3.x()}))));
        const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({p1.y(), p2.y(), p3.y()}))));
        const int y1 = std::min(H - 1, static_cast<int>(std::floor(std::max({p1.y(), p2.y(), p3.y()}))));
        const double inv_a = 1.0 / A;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Eigen::Vector2d q(static_cast<double>(x), static_cast<double>(y));
                const double b0 = cross2(p2 - q, p3 - q) * inv_a;
                if (b0 < 0.0)
                    continue;
                const double b1 = cross2(p3 - q, p1 - q) * inv_a;
                if (b1 < 0.0)
                    continue;
                const double b2 = 1.0 - b0 - b1;
                if (b2 < 0.0)
                    continue;
                const double z = b0 * proj[i0].depth + b1 * proj[i1].depth + b2 * proj[i2].depth;
                if (z >= res.depth(y, x))
                    continue;
                res.depth(y, x) = z;
                res.triangle_id(y, x) = f;
                res.barycentric.at(y, x, 0) = b0;
                res.barycentric.at(y, x, 1) = b1;
                res.barycentric.at(y, x, 2) = b2;
            }
        }
    }

    // Shading pass.
    if (ntris > 0) {
        const VertexNormals vn = smooth_normals(*rig, surface.vertices);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const int f = res.triangle_id(y, x);
                if (f < 0)
                    continue;
                const int i0 = rig->triangles(0, f), i1 = rig->triangles(1, f), i2 = rig->triangles(2, f);
                const double b0 = res.barycentric.at(y, x, 0);
                const double b1 = res.barycentric.at(y, x, 1);
                const double b2 = res.barycentric.at(y, x, 2);
                const Eigen::Vector3d albedo =
                    b0 * appearance.albedo.col(i0) + b1 * appearance.albedo.col(i1) + b2 * appearance.albedo.col(i2);
                Eigen::Vector3d nt = b0 * vn.normals.col(i0) + b1 * vn.normals.col(i1) + b2 * vn.normals.col(i2);
                const double len = nt.norm();
                nt = len < 1e-14 ? Eigen::Vector3d(0, 0, 1) : Eigen::Vector3d(nt / len);
                res.image.set_rgb(y, x, shade(nt, albedo, appearance.sh_coeffs).rgb);
            }
        }
    }

    // Boundary mask: covered pixels whose triangle id differs from any
    // 4-neighbor (off-image neighbors count as different).
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int f = res.triangle_id(y, x);
            if (f < 0)
                continue;
            bool edge = false;
            const int dx[4] = {1, -1, 0, 0};
            const int dy[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4 && !edge; ++k) {
                const int nx = x + dx[k], ny = y + dy[k];
                if (nx < 0 || nx >= W || ny < 0 || ny >= H || res.triangle_id(ny, nx) != f)
                    edge = true;
            }
            if (edge)
                res.boundary[static_cast<size_t>(y) * W + x] = 1;
        }
    }

    res.base_image = res.image;

    // Fiducial layer.
    if (options.fiducials) {
        const FiducialConfig& fc = *options.fiducials;
        if (fc.colors.size() != fc.vertex_indices.size())
            throw FaceFitError("fiducial palette size does not match vertex list");
        // peak alpha 1 would zero the transmittance chain the Jacobian relies on
        if (!(fc.peak_alpha >= 0.0 && fc.peak_alpha <= 0.999))
            throw FaceFitError("fiducial peak alpha must lie in [0, 0.999]");
        res.splats.reserve(fc.vertex_indices.size());
        for (size_t i = 0; i < fc.vertex_indices.size(); ++i) {
            FiducialSplat s;
            s.landmark = static_cast<int>(i);
            s.vertex = fc.vertex_indices[i];
            s.color = fc.colors[i];
            const Projection& pr = proj[s.vertex];
            if (pr.valid) {
                s.center = pr.pixel;
                s.center_jacobian = pr.jacobian;
                const int px = static_cast<int>(std::lround(pr.pixel.x()));
                const int py = static_cast<int>(std::lround(pr.pixel.y()));
                if (px >= 0 && px < W && py >= 0 && py < H) {
                    const double zbuf = res.depth(py, px);
                    s.visible = !std::isfinite(zbuf) ||
                                pr.depth <= zbuf * (1.0 + fc.depth_tolerance) + fc.depth_tolerance * 1e-3;
                }
            }
            res.splats.push_back(s);
        }
        for (const FiducialSplat& s : res.splats) {
            if (!s.visible)
                continue;
            const int x0 = std::max(0, static_cast<int>(std::floor(s.center.x() - fc.radius)));
            const int x1 = std::min(W - 1, static_cast<int>(std::ceil(s.center.x() + fc.radius)));
            const int y0 = std::max(0, static_cast<int>(std::floor(s.center.y() - fc.radius)));
            const int y1 = std::min(H - 1, static_cast<int>(std::ceil(s.center.y() + fc.radius)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const SplatProfile sp = splat_alpha(Eigen::Vector2d(x, y), s.center, fc.radius, fc.peak_alpha);
                    if (sp.alpha <= 0.0)
                        continue;
                    const Eigen::Vector3d cur = res.image.rgb(y, x);
                    res.image.set_rgb(y, x, cur + sp.alpha * (s.color - cur));
                }
            }
        }
    }

    return res;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> render_jacobian(const RenderResult& res,
                                                             const Camera& camera,
                                                             const MeshSurface& surface,
                                                             const AppearanceModel& appearance)
{
    const FaceRig* rig = surface.rig;
    const int n = surface.vertex_count();
    const int W = camera.width, H = camera.height;

    std::vector<Projection> proj(n);
    for (int v = 0; v < n; ++v)
        proj[v] = project(camera, surface.vertices.col(v), res.options.near_plane);

    std::vector<Eigen::Triplet<double>> trips;

    if (rig && rig->triangle_count() > 0) {
        const VertexNormals vn = smooth_normals(*rig, surface.vertices);
        const RingDerivs rings = normal_field_derivatives(*rig, surface.vertices);

        std::vector<std::pair<int, Eigen::Matrix3d>> accum; // d color / d x_u per pixel
        accum.reserve(32);
        auto add_block = [&accum](int u, const Eigen::Matrix3d& d) {
            for (auto& e : accum) {
                if (e.first == u) {
                    e.second += d;
                    return;
                }
            }
            accum.emplace_back(u, d);
        };

        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const int f = res.triangle_id(y, x);
                if (f < 0)
                    continue;
                const int idx[3] = {rig->triangles(0, f), rig->triangles(1, f), rig->triangles(2, f)};
                const Eigen::Vector2d p1 = proj[idx[0]].pixel, p2 = proj[idx[1]].pixel, p3 = proj[idx[2]].pixel;
                const double A = cross2(p2 - p1, p3 - p1);
                if (std::abs(A) < 1e-12)
                    continue;
                const double inv_a = 1.0 / A;
                const Eigen::Vector2d q(static_cast<double>(x), static_cast<double>(y));
                const double b[3] = {res.barycentric.at(y, x, 0), res.barycentric.at(y, x, 1),
                                     res.barycentric.at(y, x, 2)};

                // Screen-space barycentric derivatives w.r.t. each projected
                // vertex. db[k][m] is a 1x2 gradient of b_k w.r.t. p_{m+1}.
                const Eigen::Vector2d dA[3] = {perp(p2 - p3), perp(p3 - p1), perp(p1 - p2)};
                Eigen::Vector2d db[3][3];
                db[0][0] = -b[0] * inv_a * dA[0];
                db[0][1] = (perp(p3 - q) - b[0] * dA[1]) * inv_a;
                db[0][2] = (perp(q - p2) - b[0] * dA[2]) * inv_a;
                db[1][0] = (perp(q - p3) - b[1] * dA[0]) * inv_a;
                db[1][1] = -b[1] * inv_a * dA[1];
                db[1][2] = (perp(p1 - q) - b[1] * dA[2]) * inv_a;
                db[2][0] = (perp(p2 - q) - b[2] * dA[0]) * inv_a;
                db[2][1] = (perp(q - p1) - b[2] * dA[1]) * inv_a;
                db[2][2] = -b[2] * inv_a * dA[2];

                const Eigen::Vector3d albedo = b[0] * appearance.albedo.col(idx[0]) +
                                               b[1] * appearance.albedo.col(idx[1]) +
                                               b[2] * appearance.albedo.col(idx[2]);
                Eigen::Vector3d nt = b[0] * vn.normals.col(idx[0]) + b[1] * vn.normals.col(idx[1]) +
                                     b[2] * vn.normals.col(idx[2]);
                const double nlen = nt.norm();
                if (nlen < 1e-14)
                    continue;
                const Eigen::Vector3d nu = nt / nlen;
                const ShadeResult sh = shade(nu, albedo, appearance.sh_coeffs);
                const Eigen::Matrix3d Pn = (Eigen::Matrix3d::Identity() - nu * nu.transpose()) / nlen;
                const Eigen::Matrix3d dC_dnt = sh.d_normal * Pn;

                accum.clear();
                for (int m = 0; m < 3; ++m) {
                    // d b_k / d x_{idx[m]} via the projection chain.
                    Eigen::Matrix3d dbdx; // rows k = bary, cols = world coords
                    for (int k = 0; k < 3; ++k)
                        dbdx.row(k) = db[k][m].transpose() * proj[idx[m]].jacobian;
                    Eigen::Matrix3d block = Eigen::Matrix3d::Zero();
                    // Albedo interpolation term.
                    for (int ch = 0; ch < 3; ++ch) {
                        Eigen::RowVector3d da = Eigen::RowVector3d::Zero();
                        for (int k = 0; k < 3; ++k)
                            da += appearance.albedo(ch, idx[k]) * dbdx.row(k);
                        block.row(ch) += sh.d_albedo[ch] * da;
                    }
                    // Normal interpolation term (bary part).
                    Eigen::Matrix3d dnt = Eigen::Matrix3d::Zero();
                    for (int k = 0; k < 3; ++k)
                        dnt += vn.normals.col(idx[k]) * dbdx.row(k);
                    block += dC_dnt * dnt;
                    add_block(idx[m], block);
                }
                // Normal field term: interpolated vertex normals move with
                // the one-ring of each corner.
                for (int k = 0; k < 3; ++k) {
                    const int v = idx[k];
                    if (vn.inv_lengths[v] == 0.0)
                        continue;
                    const Eigen::Matrix3d Pv =
                        (Eigen::Matrix3d::Identity() - vn.normals.col(v) * vn.normals.col(v).transpose()) *
                        vn.inv_lengths[v];
                    const Eigen::Matrix3d lead = dC_dnt * (b[k] * Pv);
                    for (const auto& [u, dmdx] : rings[v])
                        add_block(u, lead * dmdx);
                }

                const int row0 = (y * W + x) * 3;
                for (const auto& [u, block] : accum) {
                    for (int ch = 0; ch < 3; ++ch)
                        for (int a = 0; a < 3; ++a)
                            if (block(ch, a) != 0.0)
                                trips.emplace_back(row0 + ch, 3 * u + a, block(ch, a));
                }
            }
        }
    }

    // Fiducial layer: scale the base rows of touched pixels by the product
    // of (1 - alpha) over their splats and add the splat-motion terms.
    std::unordered_map<int, double> pixel_scale;
    std::vector<Eigen::Triplet<double>> extra;
    if (res.options.fiducials) {
        const FiducialConfig& fc = *res.options.fiducials;
        // Walk splats in composite order per pixel, tracking the color seen
        // by each splat so its motion term matches the forward composite.
        std::unordered_map<int, Eigen::Vector3d> current_color;
        for (const FiducialSplat& s : res.splats) {
            if (!s.visible)
                continue;
            const int x0 = std::max(0, static_cast<int>(std::floor(s.center.x() - fc.radius)));
            const int x1 = std::min(W - 1, static_cast<int>(std::ceil(s.center.x() + fc.radius)));
            const int y0 = std::max(0, static_cast<int>(std::floor(s.center.y() - fc.radius)));
            const int y1 = std::min(H - 1, static_cast<int>(std::ceil(s.center.y() + fc.radius)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const SplatProfile sp = splat_alpha(Eigen::Vector2d(x, y), s.center, fc.radius, fc.peak_alpha);
                    if (sp.alpha <= 0.0)
                        continue;
                    const int pix = y * W + x;
                    auto [it, inserted] = current_color.try_emplace(pix, res.base_image.rgb(y, x));
                    const Eigen::Vector3d under = it->second;
                    auto [sit, sinserted] = pixel_scale.try_emplace(pix, 1.0);

                    // d value / d center for this splat, scaled by the
                    // transmittance of later splats. Later splats multiply
                    // everything accumulated so far by (1 - alpha), which is
                    // exactly how `pixel_scale` is folded in below, so emit
                    // the term divided by the current cumulative scale and
                    // let the final per-pixel scaling restore it.
                    const Eigen::RowVector3d dalpha_dx = sp.d_center.transpose() * s.center_jacobian;
                    const Eigen::Vector3d lead = s.color - under;
                    const int row0 = pix * 3;
                    // Note: contributions from splat k must be scaled by
                    // prod_{j>k} (1 - alpha_j); base rows by prod over all.
                    // We emit splat terms unscaled and track the running
                    // prefix product, then fix both up after the loop by
                    // dividing by the prefix at emission time.
                    const double prefix_after = sit->second * (1.0 - sp.alpha);
                    for (int ch = 0; ch < 3; ++ch)
                        for (int a = 0; a < 3; ++a) {
                            const double v = lead[ch] * dalpha_dx[a];
                            if (v != 0.0)
                                extra.emplace_back(row0 + ch, 3 * s.vertex + a,
                                                   v / std::max(prefix_after, 1e-300));
                        }
                    it->second = under + sp.alpha * (s.color - under);
                    sit->second = prefix_after;
                }
            }
        }
        // The emitted splat terms were divided by the prefix product up to
        // and including their own splat; multiplying by the final product
        // leaves exactly prod_{j>k}(1 - alpha_j).
        for (auto& t : extra) {
            const int pix = t.row() / 3;
            const double total = pixel_scale.at(pix);
            t = Eigen::Triplet<double>(t.row(), t.col(), t.value() * total);
        }
        for (auto& t : trips) {
            auto it = pixel_scale.find(t.row() / 3);
            if (it != pixel_scale.end())
                t = Eigen::Triplet<double>(t.row(), t.col(), t.value() * it->second);
        }
    }

    trips.insert(trips.end(), extra.begin(), extra.end());
    Eigen::SparseMatrix<double, Eigen::RowMajor> J(H * W * 3, 3 * n);
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
}

} // namespace facefit
