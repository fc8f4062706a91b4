/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: include/facefit/flow.h
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

#include <Eigen/Core>

#include "facefit/common.h"
#include "facefit/image.h"

namespace facefit {

/// Dense displacement field in pixels at the configured flow resolution.
/// u is the x displacement, v the y displacement.
struct FlowField
{
    Eigen::ArrayXXd u;
    Eigen::ArrayXXd v;

    int resolution_y() const { return static_cast<int>(u.rows()); }
    int resolution_x() const { return static_cast<int>(u.cols()); }
    void validate(int resolution) const;
};

/// Dense optical flow between two images, resized internally to the flow
/// resolution. Both the forward map and its linearizations are exposed:
/// the vjp pulls a flow cotangent back to both input images, the jvp pushes
/// image tangents forward to a flow tangent (used to assemble flow-energy
/// Jacobians column by column).
class FlowBackend
{
public:
    virtual ~FlowBackend() = default;
    virtual FlowField flow(const Image& a, const Image& b) const = 0;
    virtual void flow_vjp(const Image& a, const Image& b, const FlowField& cotangent,
                          Image* cotangent_a, Image* cotangent_b) const = 0;
    virtual FlowField flow_jvp(const Image& a, const Image& b, const Image* tangent_a,
                               const Image* tangent_b) const = 0;
    virtual int resolution() const = 0;
};

struct VariationalFlowOptions
{
    int levels = 3;
    int iterations = 20;
    double smoothness = 0.1;
    int resolution = 512;

    void validate() const;
};

/**
 * Coarse-to-fine variational flow: grayscale pyramids, one backward warp of
 * the second image per level, then a fixed count of Jacobi iterations of the
 * classic brightness-constancy + smoothness update on the flow increment.
 * Deterministic and smooth in the inputs; the vjp is the exact adjoint of
 * the unrolled computation.
 */
class VariationalFlowBackend : public FlowBackend
{
public:
    explicit VariationalFlowBackend(VariationalFlowOptions options = {});

    FlowField flow(const Image& a, const Image& b) const override;
    void flow_vjp(const Image& a, const Image& b, const FlowField& cotangent, Image* cotangent_a,
                  Image* cotangent_b) const override;
    FlowField flow_jvp(const Image& a, const Image& b, const Image* tangent_a,
                       const Image* tangent_b) const override;
    int resolution() const override { return options_.resolution; }

    const VariationalFlowOptions& options() const { return options_; }

private:
    VariationalFlowOptions options_;
};

} // namespace facefit
