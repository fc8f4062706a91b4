/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/dogleg.h
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

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "facefit/energy.h"

namespace facefit {

struct SolveOptions
{
    /// Trial-step budget; the paper-style stage schedules use small caps
    /// deliberately as an underfitting control.
    int max_iterations = 30;
    double initial_radius = 0.25;
    double min_radius = 1e-10;
    double max_radius = 10.0;
    double accept_threshold = 0.05; // gain ratio below which the step is rejected
    double expand_threshold = 0.75; // gain ratio above which the radius grows
    double shrink_factor = 0.5;
    double expand_factor = 2.0;
    double gradient_tolerance = 1e-8; // on the max-abs gradient entry
    double step_tolerance = 1e-12;
    double gn_regularization = 1e-8; // scaled by trace(J^T J)/n

    void validate() const;
};

enum class TerminationReason
{
    MaxIterations,
    GradientTolerance,
    StepTolerance,
    TrustRegionCollapsed,
    ResidualZero,
    Aborted
};

const char* to_string(TerminationReason reason);

struct SolveReport
{
    Eigen::VectorXd params; // final masked parameter vector
    std::vector<double> residual_norms; // |r| at start plus after each accepted step
    std::vector<double> radius_history; // trust radius after each trial
    TerminationReason reason = TerminationReason::MaxIterations;
    int iterations = 0;     // trial steps evaluated
    int accepted_steps = 0;
    std::string message;

    double initial_residual() const { return residual_norms.empty() ? 0.0 : residual_norms.front(); }
    double final_residual() const { return residual_norms.empty() ? 0.0 : residual_norms.back(); }
};

/// Evaluates the stacked residual (and, when `jacobian` is non-null, its
/// Jacobian) at a masked parameter vector. Returning false aborts the solve,
/// keeping the last accepted parameters.
using ResidualFn =
    std::function<bool(const Eigen::VectorXd& p, Eigen::VectorXd* residual, SparseRowMatrix* jacobian)>;

/**
 * Classic dogleg trust-region least squares: Gauss-Newton step from the
 * regularized normal equations, Cauchy point, dogleg interpolation against
 * the trust radius, gain-ratio radius control. Only accepted steps move the
 * parameters, so the recorded residual norms decrease monotonically.
 */
SolveReport dogleg_solve(const ResidualFn& fn, const Eigen::VectorXd& p0, const ParamMask& mask,
                         const SolveOptions& options = {});

/// Gathers the active entries of a full parameter vector.
Eigen::VectorXd apply_mask(const Eigen::VectorXd& p_full, const ParamMask& mask);

/// Scatters a masked vector back into a copy of `base`; inactive entries of
/// the result are bit-identical to `base`.
Eigen::VectorXd expand_mask(const Eigen::VectorXd& p_masked, const ParamMask& mask,
                            const Eigen::VectorXd& base);

} // namespace facefit
