/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/energy.cpp
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
#include "facefit/energy.h"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace facefit {

int ParamMask::count() const
{
    int c = 0;
    for (uint8_t a : active)
        c += a != 0;
    return c;
}

std::vector<int> ParamMask::indices() const
{
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (active[i])
            out.push_back(i);
    return out;
}

void ParamMask::validate() const
{
    if (count() == 0)
        throw FaceFitError("parameter mask selects no entries");
}

LandmarkWeights LandmarkWeights::mouth_heavy(const FaceRig& rig, double factor)
{
    LandmarkWeights w;
    for (int i = 0; i < kNumLandmarks; ++i)
        if (rig.landmark_groups[i] == LandmarkGroup::Mouth)
            w.w[i] = factor;
    return w;
}

void LandmarkWeights::validate() const
{
    if (w.size() != kNumLandmarks)
        throw FaceFitError("landmark weights must have 68 entries");
    if ((w.array() < 0.0).any())
        throw FaceFitError("landmark weights must be non-negative");
}

std::array<bool, kNumLandmarks> landmark_subset_mask(const FaceRig& rig, LandmarkSubset subset)
{
    std::array<bool, kNumLandmarks> out{};
    for (int i = 0; i < kNumLandmarks; ++i) {
        switch (subset) {
        case LandmarkSubset::All: out[i] = true; break;
        case LandmarkSubset::NonJaw: out[i] = rig.landmark_groups[i] != LandmarkGroup::Jaw; break;
        case LandmarkSubset::JawOnly: out[i] = rig.landmark_groups[i] == LandmarkGroup::Jaw; break;
        }
    }
    return out;
}

SparseRowMatrix mask_columns(const SparseRowMatrix& full, const ParamMask& mask)
{
    std::vector<int> col_of(full.cols(), -1);
    int nc = 0;
    for (int i = 0; i < mask.size(); ++i)
        if (mask[i])
            col_of[i] = nc++;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(full.nonZeros());
    for (int r = 0; r < full.outerSize(); ++r)
        for (SparseRowMatrix::InnerIterator it(full, r); it; ++it)
            if (col_of[it.col()] >= 0)
                trips.emplace_back(r, col_of[it.col()], it.value());
    SparseRowMatrix out(full.rows(), nc);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

LandmarkChain::LandmarkChain(const LandmarkExtraction* extraction, const Image* full_image,
                             const SparseRowMatrix* render_jacobian,
                             const SparseRowMatrix* pose_jacobian_masked)
    : extraction_(extraction), full_image_(full_image), render_jacobian_(render_jacobian),
      pose_jacobian_(pose_jacobian_masked)
{
}

const Eigen::Matrix2Xd& LandmarkChain::rows(int landmark) const
{
    auto it = cache_.find(landmark);
    if (it != cache_.end())
        return it->second;

    const int np = static_cast<int>(pose_jacobian_->cols());
    const int W = full_image_->width();
    Eigen::Matrix2Xd rows = Eigen::Matrix2Xd::Zero(2, np);
    for (int k = 0; k < 2; ++k) {
        const Eigen::Vector2d cot = k == 0 ? Eigen::Vector2d(1, 0) : Eigen::Vector2d(0, 1);
        const std::vector<PixelCotangent> img_cot =
            extraction_->image_cotangent(landmark, cot, *full_image_);
        // Pull back through dF/dx_R to a sparse vertex cotangent.
        std::unordered_map<int, double> vert_cot;
        for (const PixelCotangent& pc : img_cot) {
            const int row = (pc.y * W + pc.x) * 3 + pc.c;
            for (SparseRowMatrix::InnerIterator jt(*render_jacobian_, row); jt; ++jt)
                vert_cot[static_cast<int>(jt.col())] += pc.value * jt.value();
        }
        // And through dx_R/dp.
        for (const auto& [vc, val] : vert_cot)
            for (SparseRowMatrix::InnerIterator jt(*pose_jacobian_, vc); jt; ++jt)
                rows(k, jt.col()) += val * jt.value();
    }
    return cache_.emplace(landmark, std::move(rows)).first->second;
}

ResidualBlock landmark_energy(const LandmarkWeights& W, const LandmarkSet& lm_render,
                              const LandmarkSet& lm_captured, const LandmarkChain& chain,
                              const std::array<bool, kNumLandmarks>& selection, bool want_jacobian)
{
    W.validate();
    ResidualBlock block;
    block.label = "landmark";
    std::vector<int> used;
    for (int i = 0; i < kNumLandmarks; ++i)
        if (selection[i] && lm_render.valid[i] && lm_captured.valid[i])
            used.push_back(i);
    const int np = chain.active_count();
    block.residual.resize(2 * used.size());
    std::vector<Eigen::Triplet<double>> trips;
    for (size_t k = 0; k < used.size(); ++k) {
        const int i = used[k];
        const Eigen::Vector2d d = lm_render.points[i] - lm_captured.points[i];
        block.residual[2 * k] = W.w[i] * d.x();
        block.residual[2 * k + 1] = W.w[i] * d.y();
        if (want_jacobian && W.w[i] != 0.0) {
            const Eigen::Matrix2Xd& rows = chain.rows(i);
            for (int j = 0; j < np; ++j)
                for (int a = 0; a < 2; ++a)
                    if (rows(a, j) != 0.0)
                        trips.emplace_back(2 * k + a, j, W.w[i] * rows(a, j));
        }
    }
    if (want_jacobian) {
        block.jacobian.resize(block.rows(), np);
        block.jacobian.setFromTriplets(trips.begin(), trips.end());
    }
    return block;
}

ResidualBlock edge_energy(const LandmarkSet& lm_render, const LandmarkSet& lm_captured,
                          const LandmarkChain& chain, const std::array<LandmarkGroup, kNumLandmarks>& groups,
                          const std::array<bool, kNumLandmarks>& selection, bool want_jacobian)
{
    ResidualBlock block;
    block.label = "edge";
    std::vector<std::pair<int, int>> pairs;
    for (int i = 1; i < kNumLandmarks; ++i) {
        if (groups[i] != groups[i - 1])
            continue;
        if (!selection[i] || !selection[i - 1])
            continue;
        if (!lm_render.valid[i] || !lm_render.valid[i - 1] || !lm_captured.valid[i] ||
            !lm_captured.valid[i - 1])
            continue;
        pairs.emplace_back(i - 1, i);
    }
    const int np = chain.active_count();
    block.residual.resize(2 * pairs.size());
    std::vector<Eigen::Triplet<double>> trips;
    for (size_t k = 0; k < pairs.size(); ++k) {
        const auto [a, b] = pairs[k];
        const Eigen::Vector2d edge_render = lm_render.points[b] - lm_render.points[a];
        const Eigen::Vector2d edge_captured = lm_captured.points[b] - lm_captured.points[a];
        const Eigen::Vector2d d = edge_render - edge_captured;
        block.residual[2 * k] = d.x();
        block.residual[2 * k + 1] = d.y();
        if (want_jacobian) {
            const Eigen::Matrix2Xd rows = chain.rows(b) - chain.rows(a);
            for (int j = 0; j < np; ++j)
                for (int c = 0; c < 2; ++c)
                    if (rows(c, j) != 0.0)
                        trips.emplace_back(2 * k + c, j, rows(c, j));
        }
    }
    if (want_jacobian) {
        block.jacobian.resize(block.rows(), np);
        block.jacobian.setFromTriplets(trips.begin(), trips.end());
    }
    return block;
}

ResidualBlock weight_regularizer(double lambda, const Eigen::VectorXd& p_full, const ParamMask& mask)
{
    ResidualBlock block;
    block.label = "weight_reg";
    const double s = std::sqrt(lambda);
    const std::vector<int> idx = mask.indices();
    std::vector<std::pair<int, int>> rows; // (full index, active column)
    for (size_t j = 0; j < idx.size(); ++j)
        if (idx[j] >= 6)
            rows.emplace_back(idx[j], static_cast<int>(j));
    block.residual.resize(rows.size());
    std::vector<Eigen::Triplet<double>> trips;
    for (size_t k = 0; k < rows.size(); ++k) {
        block.residual[k] = s * p_full[rows[k].first];
        trips.emplace_back(static_cast<int>(k), rows[k].second, s);
    }
    block.jacobian.resize(block.rows(), static_cast<int>(idx.size()));
    block.jacobian.setFromTriplets(trips.begin(), trips.end());
    return block;
}

ResidualBlock deviation_prior(const Eigen::VectorXd& p_full, const Eigen::VectorXd& p_ref,
                              const Eigen::VectorXd& weights_full, const ParamMask& mask)
{
    if (p_full.size() != p_ref.size() || p_full.size() != weights_full.size())
        throw FaceFitError("deviation_prior: dimension mismatch");
    ResidualBlock block;
    block.label = "prior";
    const std::vector<int> idx = mask.indices();
    std::vector<std::pair<int, int>> rows;
    for (size_t j = 0; j < idx.size(); ++j)
        if (weights_full[idx[j]] != 0.0)
            rows.emplace_back(idx[j], static_cast<int>(j));
    block.residual.resize(rows.size());
    std::vector<Eigen::Triplet<double>> trips;
    for (size_t k = 0; k < rows.size(); ++k) {
        const int i = rows[k].first;
        block.residual[k] = weights_full[i] * (p_full[i] - p_ref[i]);
        trips.emplace_back(static_cast<int>(k), rows[k].second, weights_full[i]);
    }
    block.jacobian.resize(block.rows(), static_cast<int>(idx.size()));
    block.jacobian.setFromTriplets(trips.begin(), trips.end());
    return block;
}

ResidualBlock flow_match_energy(const FlowBackend& backend, const std::vector<FlowEnergyTerm>& terms,
                                const FlowField* reference, const std::vector<Image>& active_tangents,
                                const std::vector<uint8_t>& foreground_mask, const std::string& label,
                                bool want_jacobian)
{
    const int res = backend.resolution();
    if (static_cast<int>(foreground_mask.size()) != res * res)
        throw FaceFitError("flow foreground mask does not match the flow resolution");

    Eigen::ArrayXXd ru = Eigen::ArrayXXd::Zero(res, res);
    Eigen::ArrayXXd rv = Eigen::ArrayXXd::Zero(res, res);
    for (const FlowEnergyTerm& t : terms) {
        const FlowField f = backend.flow(*t.image_a, *t.image_b);
        ru += t.sign * f.u;
        rv += t.sign * f.v;
    }
    if (reference) {
        reference->validate(res);
        ru -= reference->u;
        rv -= reference->v;
    }

    std::vector<std::pair<int, int>> px;
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
            if (foreground_mask[static_cast<size_t>(y) * res + x])
                px.emplace_back(y, x);

    ResidualBlock block;
    block.label = label;
    block.residual.resize(2 * px.size());
    for (size_t k = 0; k < px.size(); ++k) {
        block.residual[2 * k] = ru(px[k].first, px[k].second);
        block.residual[2 * k + 1] = rv(px[k].first, px[k].second);
    }

    if (want_jacobian) {
        const int np = static_cast<int>(active_tangents.size());
        std::vector<Eigen::Triplet<double>> trips;
        for (int j = 0; j < np; ++j) {
            Eigen::ArrayXXd ju = Eigen::ArrayXXd::Zero(res, res);
            Eigen::ArrayXXd jv = Eigen::ArrayXXd::Zero(res, res);
            for (const FlowEnergyTerm& t : terms) {
                if (!t.active_a && !t.active_b)
                    continue;
                const FlowField tf = backend.flow_jvp(*t.image_a, *t.image_b,
                                                      t.active_a ? &active_tangents[j] : nullptr,
                                                      t.active_b ? &active_tangents[j] : nullptr);
                ju += t.sign * tf.u;
                jv += t.sign * tf.v;
            }
            for (size_t k = 0; k < px.size(); ++k) {
                const double vu = ju(px[k].first, px[k].second);
                const double vv = jv(px[k].first, px[k].second);
                if (vu != 0.0)
                    trips.emplace_back(static_cast<int>(2 * k), j, vu);
                if (vv != 0.0)
                    trips.emplace_back(static_cast<int>(2 * k + 1), j, vv);
            }
        }
        block.jacobian.resize(block.rows(), np);
        block.jacobian.setFromTriplets(trips.begin(), trips.end());
    }
    return block;
}

std::vector<uint8_t> flow_foreground_mask(const std::vector<const RenderResult*>& renders,
                                          int flow_resolution, int dilate_px)
{
    const int res = flow_resolution;
    std::vector<uint8_t> mask(static_cast<size_t>(res) * res, 0);
    const auto add_coverage = [&](const RenderResult& rr) {
        const int H = static_cast<int>(rr.triangle_id.rows());
        const int W = static_cast<int>(rr.triangle_id.cols());
        for (int y = 0; y < res; ++y) {
            const int sy = std::min(H - 1, static_cast<int>(y * (static_cast<double>(H) / res)));
            for (int x = 0; x < res; ++x) {
                const int sx = std::min(W - 1, static_cast<int>(x * (static_cast<double>(W) / res)));
                if (rr.triangle_id(sy, sx) >= 0)
                    mask[static_cast<size_t>(y) * res + x] = 1;
            }
        }
    };
    for (const RenderResult* rr : renders)
        add_coverage(*rr);
    if (dilate_px > 0) {
        // Separable Chebyshev dilation.
        std::vector<uint8_t> tmp(mask.size(), 0);
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                uint8_t v = 0;
                for (int d = -dilate_px; d <= dilate_px && !v; ++d) {
                    const int xx = x + d;
                    if (xx >= 0 && xx < res && mask[static_cast<size_t>(y) * res + xx])
                        v = 1;
                }
                tmp[static_cast<size_t>(y) * res + x] = v;
            }
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                uint8_t v = 0;
                for (int d = -dilate_px; d <= dilate_px && !v; ++d) {
                    const int yy = y + d;
                    if (yy >= 0 && yy < res && tmp[static_cast<size_t>(yy) * res + x])
                        v = 1;
                }
                mask[static_cast<size_t>(y) * res + x] = v;
            }
    }
    return mask;
}

std::vector<uint8_t> flow_foreground_mask(const RenderResult& a, const RenderResult& b,
                                          int flow_resolution, int dilate_px)
{
    return flow_foreground_mask({&a, &b}, flow_resolution, dilate_px);
}

std::vector<Image> render_tangents(const RenderResult& rr, const SparseRowMatrix& render_jac,
                                   const SparseRowMatrix& pose_jac_masked)
{
    const int H = rr.image.height();
    const int W = rr.image.width();
    const int np = static_cast<int>(pose_jac_masked.cols());
    std::vector<Image> out(np, Image(H, W, 3));
    // render_jac rows are pixel-channel, cols vertex coords; compose with
    // dx_R/dp column by column.
    Eigen::MatrixXd pj = Eigen::MatrixXd(pose_jac_masked); // 3n x np, small np
    for (int r = 0; r < render_jac.outerSize(); ++r) {
        SparseRowMatrix::InnerIterator it(render_jac, r);
        if (!it)
            continue;
        const int c = r % 3;
        const int pixel = r / 3;
        const int y = pixel / W;
        const int x = pixel % W;
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(np);
        for (; it; ++it)
            row += it.value() * pj.row(it.col());
        for (int j = 0; j < np; ++j)
            out[j].at(y, x, c) = row[j];
    }
    return out;
}

ResidualBlock stack(std::vector<ResidualBlock> blocks, const ParamMask& mask)
{
    if (blocks.empty())
        throw FaceFitError("stack: no residual blocks");
    std::stable_sort(blocks.begin(), blocks.end(),
                     [](const ResidualBlock& a, const ResidualBlock& b) { return a.label < b.label; });
    const int np = mask.count();
    int rows = 0;
    bool all_jac = true;
    for (const ResidualBlock& b : blocks) {
        rows += b.rows();
        if (b.rows() > 0 && !b.has_jacobian())
            all_jac = false;
        if (b.has_jacobian() && b.jacobian.cols() != np)
            throw FaceFitError("stack: block \"" + b.label + "\" has mismatched parameter count");
    }
    if (rows == 0)
        throw FaceFitError("stack: no residual rows");
    ResidualBlock out;
    out.label = "stacked";
    out.residual.resize(rows);
    std::vector<Eigen::Triplet<double>> trips;
    int r0 = 0;
    for (const ResidualBlock& b : blocks) {
        const double s = std::sqrt(b.weight);
        out.residual.segment(r0, b.rows()) = s * b.residual;
        if (all_jac && b.rows() > 0) {
            for (int r = 0; r < b.jacobian.outerSize(); ++r)
                for (SparseRowMatrix::InnerIterator it(b.jacobian, r); it; ++it)
                    trips.emplace_back(r0 + r, static_cast<int>(it.col()), s * it.value());
        }
        r0 += b.rows();
    }
    if (all_jac) {
        out.jacobian.resize(rows, np);
        out.jacobian.setFromTriplets(trips.begin(), trips.end());
    }
    return out;
}

} // namespace facefit
