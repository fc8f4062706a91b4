/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/energy.h
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
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "facefit/feature_backend.h"
#include "facefit/flow.h"
#include "facefit/rasterizer.h"
#include "facefit/rig.h"

namespace facefit {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Boolean selector over the full parameter vector p = [theta, t, w],
/// naming the entries a stage is allowed to change.
struct ParamMask
{
    std::vector<uint8_t> active;

    static ParamMask none(int n) { return {std::vector<uint8_t>(n, 0)}; }
    static ParamMask all(int n) { return {std::vector<uint8_t>(n, 1)}; }

    int size() const { return static_cast<int>(active.size()); }
    int count() const;
    std::vector<int> indices() const;
    bool operator[](int i) const { return active[i] != 0; }
    void validate() const;
};

/// A residual vector with its Jacobian w.r.t. the active parameter subset.
/// `weight` is a scalar block weight applied by stack() as a sqrt-weight
/// multiplier. Blocks built without Jacobians carry an empty matrix.
struct ResidualBlock
{
    std::string label;
    Eigen::VectorXd residual;
    SparseRowMatrix jacobian;
    double weight = 1.0;

    int rows() const { return static_cast<int>(residual.size()); }
    bool has_jacobian() const { return jacobian.rows() == residual.size() && jacobian.size() > 0; }
};

/// Diagonal per-landmark weighting of the landmark energy.
struct LandmarkWeights
{
    Eigen::VectorXd w = Eigen::VectorXd::Ones(kNumLandmarks);

    static LandmarkWeights uniform() { return {}; }
    static LandmarkWeights mouth_heavy(const FaceRig& rig, double factor = 10.0);
    void validate() const;
};

enum class LandmarkSubset { All, NonJaw, JawOnly };

std::array<bool, kNumLandmarks> landmark_subset_mask(const FaceRig& rig, LandmarkSubset subset);

/// Column-slices a full-parameter Jacobian down to the active subset.
SparseRowMatrix mask_columns(const SparseRowMatrix& full, const ParamMask& mask);

/**
 * The render-side chain rule bundle for landmark energies. Landmark rows
 * d(landmark)/d(active params) compose the extraction vjp (soft-argmax,
 * backend, crop/resize), the render Jacobian dF/dx_R, and the masked pose
 * Jacobian dx_R/dp; they are computed lazily per landmark and cached.
 */
class LandmarkChain
{
public:
    LandmarkChain(const LandmarkExtraction* extraction, const Image* full_image,
                  const SparseRowMatrix* render_jacobian, const SparseRowMatrix* pose_jacobian_masked);

    /// 2 x n_active Jacobian of landmark i's full-resolution coordinates.
    const Eigen::Matrix2Xd& rows(int landmark) const;

    int active_count() const { return static_cast<int>(pose_jacobian_->cols()); }

private:
    const LandmarkExtraction* extraction_;
    const Image* full_image_;
    const SparseRowMatrix* render_jacobian_;
    const SparseRowMatrix* pose_jacobian_;
    mutable std::map<int, Eigen::Matrix2Xd> cache_;
};

/// E1: weighted landmark differences W (N(F) - N(F*)), two rows per landmark
/// valid in both sets, restricted to `selection`. Landmarks with zero weight
/// keep their rows, contributing exactly zero.
ResidualBlock landmark_energy(const LandmarkWeights& W, const LandmarkSet& lm_render,
                              const LandmarkSet& lm_captured, const LandmarkChain& chain,
                              const std::array<bool, kNumLandmarks>& selection, bool want_jacobian);

/// E2: edge-preserving energy comparing consecutive-landmark edge vectors
/// between render and capture, paired within each landmark group.
ResidualBlock edge_energy(const LandmarkSet& lm_render, const LandmarkSet& lm_captured,
                          const LandmarkChain& chain, const std::array<LandmarkGroup, kNumLandmarks>& groups,
                          const std::array<bool, kNumLandmarks>& selection, bool want_jacobian);

/// L2 weight regularizer: residual sqrt(lambda) * w_b per active blendshape
/// entry, so the squared norm contribution is lambda * |w|^2.
ResidualBlock weight_regularizer(double lambda, const Eigen::VectorXd& p_full, const ParamMask& mask);

/// Weighted deviation from a reference parameter vector over the active set.
ResidualBlock deviation_prior(const Eigen::VectorXd& p_full, const Eigen::VectorXd& p_ref,
                              const Eigen::VectorXd& weights_full, const ParamMask& mask);

/// One flow evaluation N(a, b) inside a flow energy; `active_*` marks which
/// input depends on the active parameters (via the active render tangents).
struct FlowEnergyTerm
{
    const Image* image_a = nullptr;
    const Image* image_b = nullptr;
    bool active_a = false;
    bool active_b = false;
    double sign = 1.0;
};

/**
 * Flow-matching energy: residual = sum_k sign_k flow(term_k) - reference,
 * two rows per masked flow pixel. `reference` is the captured-image flow
 * (or null for self-flow style differences). Jacobian columns are flow jvps
 * of the active render tangents, one per active parameter.
 */
ResidualBlock flow_match_energy(const FlowBackend& backend, const std::vector<FlowEnergyTerm>& terms,
                                const FlowField* reference, const std::vector<Image>& active_tangents,
                                const std::vector<uint8_t>& foreground_mask, const std::string& label,
                                bool want_jacobian);

/// Union of the renders' face coverage, resized to the flow resolution and
/// dilated by `dilate_px` (Chebyshev radius).
std::vector<uint8_t> flow_foreground_mask(const std::vector<const RenderResult*>& renders,
                                          int flow_resolution, int dilate_px = 5);
std::vector<uint8_t> flow_foreground_mask(const RenderResult& a, const RenderResult& b,
                                          int flow_resolution, int dilate_px = 5);

/// Dense image tangents dF/dp_j of a render for each active parameter,
/// assembled from the sparse render and pose Jacobians.
std::vector<Image> render_tangents(const RenderResult& rr, const SparseRowMatrix& render_jac,
                                   const SparseRowMatrix& pose_jac_masked);

/// Vertical concatenation of weighted blocks (sorted by label for
/// determinism). Throws FaceFitError when no rows survive.
ResidualBlock stack(std::vector<ResidualBlock> blocks, const ParamMask& mask);

} // namespace facefit
