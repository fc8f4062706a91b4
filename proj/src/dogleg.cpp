/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/dogleg.cpp
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
#include "facefit/dogleg.h"

#include <cmath>

#include <Eigen/Dense>

namespace facefit {

void SolveOptions::validate() const
{
    if (max_iterations < 0)
        throw FaceFitError("max_iterations must be >= 0");
    if (!(initial_radius > 0.0) || !(min_radius > 0.0) || !(max_radius >= initial_radius))
        throw FaceFitError("invalid trust radius configuration");
    if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0))
        throw FaceFitError("tolerances must be positive");
    if (!(shrink_factor > 0.0 && shrink_factor < 1.0) || !(expand_factor > 1.0))
        throw FaceFitError("invalid radius factors");
}

const char* to_string(TerminationReason reason)
{
    switch (reason) {
    case TerminationReason::MaxIterations: return "max_iterations";
    case TerminationReason::GradientTolerance: return "gradient_tolerance";
    case TerminationReason::StepTolerance: return "step_tolerance";
    case TerminationReason::TrustRegionCollapsed: return "trust_region_collapsed";
    case TerminationReason::ResidualZero: return "residual_zero";
    case TerminationReason::Aborted: return "aborted";
    }
    return "unknown";
}

Eigen::VectorXd apply_mask(const Eigen::VectorXd& p_full, const ParamMask& mask)
{
    if (p_full.size() != mask.size())
        throw FaceFitError("apply_mask: dimension mismatch");
    Eigen::VectorXd out(mask.count());
    int k = 0;
    for (int i = 0; i < mask.size(); ++i)
        if (mask[i])
            out[k++] = p_full[i];
    return out;
}

Eigen::VectorXd expand_mask(const Eigen::VectorXd& p_masked, const ParamMask& mask,
                            const Eigen::VectorXd& base)
{
    if (base.size() != mask.size() || p_masked.size() != mask.count())
        throw FaceFitError("expand_mask: dimension mismatch");
    Eigen::VectorXd out = base;
    int k = 0;
    for (int i = 0; i < mask.size(); ++i)
        if (mask[i])
            out[i] = p_masked[k++];
    return out;
}

SolveReport dogleg_solve(const ResidualFn& fn, const Eigen::VectorXd& p0, const ParamMask& mask,
                         const SolveOptions& options)
{
    options.validate();
    mask.validate();
    if (p0.size() != mask.count())
        throw FaceFitError("dogleg_solve: initial vector does not match the mask");

    SolveReport report;
    report.params = p0;

    Eigen::VectorXd p = p0;
    Eigen::VectorXd r;
    SparseRowMatrix J;
    if (!fn(p, &r, &J)) {
        report.reason = TerminationReason::Aborted;
        report.message = "residual evaluation failed at the initial point";
        return report;
    }
    double F = r.squaredNorm();
    report.residual_norms.push_back(std::sqrt(F));

    double radius = options.initial_radius;
    report.reason = TerminationReason::MaxIterations;

    while (report.iterations < options.max_iterations) {
        if (F == 0.0) {
            report.reason = TerminationReason::ResidualZero;
            break;
        }
        const int np = static_cast<int>(p.size());
        const Eigen::VectorXd g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
            report.reason = TerminationReason::GradientTolerance;
            break;
        }
        Eigen::MatrixXd B = (J.transpose() * J).toDense();
        const double eps = options.gn_regularization * (B.trace() / np) + 1e-300;
        Eigen::MatrixXd Breg = B;
        Breg.diagonal().array() += eps;
        const Eigen::VectorXd h_gn = Breg.ldlt().solve(-g);

        const double gBg = g.dot(B * g);
        const double alpha = gBg > 0.0 ? g.squaredNorm() / gBg : radius / g.norm();
        const Eigen::VectorXd h_sd = -alpha * g;

        Eigen::VectorXd h;
        if (h_gn.norm() <= radius) {
            h = h_gn;
        } else if (h_sd.norm() >= radius) {
            h = -(radius / g.norm()) * g;
        } else {
            const Eigen::VectorXd d = h_gn - h_sd;
            const double a = d.squaredNorm();
            const double b = h_sd.dot(d);
            const double c = h_sd.squaredNorm() - radius * radius;
            const double tau = (-b + std::sqrt(std::max(0.0, b * b - a * c))) / a;
            h = h_sd + tau * d;
        }

        if (h.norm() <= options.step_tolerance * (p.norm() + options.step_tolerance)) {
            report.reason = TerminationReason::StepTolerance;
            break;
        }

        const double predicted = -(2.0 * g.dot(h) + h.dot(B * h));
        Eigen::VectorXd r_new;
        if (!fn(p + h, &r_new, nullptr)) {
            report.reason = TerminationReason::Aborted;
            report.message = "residual evaluation failed at a trial point";
            break;
        }
        ++report.iterations;
        const double F_new = r_new.squaredNorm();
        const double rho = (F - F_new) / std::max(predicted, 1e-300);

        if (rho > options.accept_threshold && F_new < F) {
            p += h;
            F = F_new;
            ++report.accepted_steps;
            report.residual_norms.push_back(std::sqrt(F));
            if (!fn(p, &r, &J)) {
                report.reason = TerminationReason::Aborted;
                report.message = "residual evaluation failed after an accepted step";
                break;
            }
            if (rho > options.expand_threshold)
                radius = std::min(radius * options.expand_factor, options.max_radius);
        } else {
            const bool at_min = radius <= options.min_radius;
            radius = std::max(radius * options.shrink_factor, options.min_radius);
            if (at_min) {
                report.reason = TerminationReason::TrustRegionCollapsed;
                report.radius_history.push_back(radius);
                break;
            }
        }
        report.radius_history.push_back(radius);
    }

    report.params = p;
    return report;
}

} // namespace facefit
