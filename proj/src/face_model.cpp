/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/face_model.cpp
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
#include "facefit/face_model.h"

#include <cmath>
#include <vector>

namespace facefit {

namespace {

Eigen::Matrix3d rot_x(double a)
{
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d m;
    m << 1, 0, 0, 0, c, -s, 0, s, c;
    return m;
}

Eigen::Matrix3d rot_y(double a)
{
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d m;
    m << c, 0, s, 0, 1, 0, -s, 0, c;
    return m;
}

Eigen::Matrix3d rot_z(double a)
{
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d m;
    m << c, -s, 0, s, c, 0, 0, 0, 1;
    return m;
}

Eigen::Matrix3d drot_x(double a)
{
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d m;
    m << 0, 0, 0, 0, -s, -c, 0, c, -s;
    return m;
}

Eigen::Matrix3d drot_y(double a)
{
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d m;
    m << -s, 0, c, 0, 0, 0, -c, 0, -s;
    return m;
}

Eigen::Matrix3d drot_z(double a)
{
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d m;
    m << -s, -c, 0, c, -s, 0, 0, 0, 0;
    return m;
}

double wrap_near(double angle, double reference)
{
    return angle + 2.0 * M_PI * std::round((reference - angle) / (2.0 * M_PI));
}

// Jaw joint transform for the given weight vector, plus its partials w.r.t.
// each of the six jaw DOF entries. The transform maps a model point v to
// pivot + A * R(e) * A^T * (v - pivot) + A * u.
struct JawTransform
{
    bool present = false;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity(); // A R A^T
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // pivot - rot*pivot + A u
    // Partials, indexed by shape slot.
    struct Dof
    {
        int slot = -1;
        bool is_rotation = false;
        int axis = 0;
        double scale = 1.0;
    };
    std::array<Dof, 6> dofs{};
    std::array<Eigen::Matrix3d, 3> drot{}; // d(A R A^T)/d euler angle (unscaled)
};

JawTransform jaw_transform(const FaceRig& rig, const Eigen::VectorXd& w)
{
    JawTransform jt;
    if (!rig.has_jaw())
        return jt;
    jt.present = true;
    const Eigen::Matrix3d& A = rig.jaw_joint.axes;
    const ShapeKind rot_kinds[3] = {ShapeKind::JawRx, ShapeKind::JawRy, ShapeKind::JawRz};
    const ShapeKind trans_kinds[3] = {ShapeKind::JawTx, ShapeKind::JawTy, ShapeKind::JawTz};
    Eigen::Vector3d e, u;
    for (int k = 0; k < 3; ++k) {
        const int rs = rig.jaw_slot(rot_kinds[k]);
        const int ts = rig.jaw_slot(trans_kinds[k]);
        e[k] = w[rs] * rig.shapes[rs].scale;
        u[k] = w[ts] * rig.shapes[ts].scale;
        jt.dofs[k] = {rs, true, k, rig.shapes[rs].scale};
        jt.dofs[3 + k] = {ts, false, k, rig.shapes[ts].scale};
    }
    const RotationWithDerivatives rd = euler_to_rotation(e);
    jt.rotation = A * rd.R * A.transpose();
    jt.translation = rig.jaw_joint.pivot - jt.rotation * rig.jaw_joint.pivot + A * u;
    for (int k = 0; k < 3; ++k)
        jt.drot[k] = A * rd.dR[k] * A.transpose();
    return jt;
}

} // namespace

RotationWithDerivatives euler_to_rotation(const Eigen::Vector3d& theta)
{
    const Eigen::Matrix3d Rx = rot_x(theta[0]);
    const Eigen::Matrix3d Ry = rot_y(theta[1]);
    const Eigen::Matrix3d Rz = rot_z(theta[2]);
    RotationWithDerivatives out;
    out.R = Rx * Ry * Rz;
    out.dR[0] = drot_x(theta[0]) * Ry * Rz;
    out.dR[1] = Rx * drot_y(theta[1]) * Rz;
    out.dR[2] = Rx * Ry * drot_z(theta[2]);
    return out;
}

Eigen::Vector3d rotation_to_euler(const Eigen::Matrix3d& R)
{
    const double sb = std::clamp(R(0, 2), -1.0, 1.0);
    const double b = std::asin(sb);
    double a, c;
    if (std::abs(sb) < 1.0 - 1e-12) {
        a = std::atan2(-R(1, 2), R(2, 2));
        c = std::atan2(-R(0, 1), R(0, 0));
    } else {
        // Gimbal lock: fold everything into the x rotation.
        a = std::atan2(R(2, 1), R(1, 1));
        c = 0.0;
    }
    return {a, b, c};
}

Eigen::Vector3d rotation_to_euler_near(const Eigen::Matrix3d& R, const Eigen::Vector3d& reference)
{
    const Eigen::Vector3d e1 = rotation_to_euler(R);
    const Eigen::Vector3d e2{e1[0] + M_PI, M_PI - e1[1], e1[2] + M_PI};
    Eigen::Vector3d best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (const Eigen::Vector3d& e : {e1, e2}) {
        Eigen::Vector3d cand;
        for (int k = 0; k < 3; ++k)
            cand[k] = wrap_near(e[k], reference[k]);
        const double cost = (cand - reference).cwiseAbs().sum();
        if (cost < best_cost) {
            best_cost = cost;
            best = cand;
        }
    }
    return best;
}

Eigen::Quaterniond euler_to_quaternion(const Eigen::Vector3d& theta)
{
    return Eigen::Quaterniond(euler_to_rotation(theta).R);
}

Eigen::Vector3d quaternion_to_euler_near(const Eigen::Quaterniond& q, const Eigen::Vector3d& reference)
{
    return rotation_to_euler_near(q.normalized().toRotationMatrix(), reference);
}

MeshSurface evaluate_surface(const FaceRig& rig, const Eigen::VectorXd& w)
{
    if (w.size() != rig.shape_count())
        throw FaceFitError("weight vector length does not match rig shape count");
    Eigen::Matrix3Xd shaped = rig.neutral_vertices;
    for (int b = 0; b < rig.shape_count(); ++b) {
        const BlendShape& s = rig.shapes[b];
        if (s.kind == ShapeKind::Delta && w[b] != 0.0)
            shaped += w[b] * s.deltas;
    }
    const JawTransform jt = jaw_transform(rig, w);
    MeshSurface out;
    out.rig = &rig;
    if (!jt.present) {
        out.vertices = std::move(shaped);
        return out;
    }
    const int n = rig.vertex_count();
    out.vertices.resize(3, n);
    for (int v = 0; v < n; ++v) {
        const double s = rig.jaw_skin_weights[v];
        const Eigen::Vector3d p = shaped.col(v);
        if (s == 0.0) {
            out.vertices.col(v) = p;
        } else {
            const Eigen::Vector3d moved = jt.rotation * p + jt.translation;
            out.vertices.col(v) = (1.0 - s) * p + s * moved;
        }
    }
    return out;
}

MeshSurface apply_rigid(const MeshSurface& surface, const Eigen::Vector3d& theta, const Eigen::Vector3d& t)
{
    const Eigen::Matrix3d R = euler_to_rotation(theta).R;
    MeshSurface out;
    out.rig = surface.rig;
    out.vertices = (R * surface.vertices).colwise() + t;
    return out;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> pose_jacobian(const FaceRig& rig, const PoseParams& params)
{
    const int n = rig.vertex_count();
    const int np = rig.param_count();
    const MeshSurface shaped_surface = evaluate_surface(rig, params.w);
    const RotationWithDerivatives rd = euler_to_rotation(params.theta);
    const JawTransform jt = jaw_transform(rig, params.w);

    // x(w) before skinning (the blendshape sum alone) is needed for jaw
    // rotation columns; recompute it without the jaw blend.
    Eigen::Matrix3Xd blend = rig.neutral_vertices;
    for (int b = 0; b < rig.shape_count(); ++b)
        if (rig.shapes[b].kind == ShapeKind::Delta && params.w[b] != 0.0)
            blend += params.w[b] * rig.shapes[b].deltas;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(n) * 3 * (6 + rig.shape_count()));

    for (int v = 0; v < n; ++v) {
        const Eigen::Vector3d xv = shaped_surface.vertices.col(v);
        // theta columns: dR_i * x(w).
        for (int i = 0; i < 3; ++i) {
            const Eigen::Vector3d col = rd.dR[i] * xv;
            for (int a = 0; a < 3; ++a)
                if (col[a] != 0.0)
                    trips.emplace_back(3 * v + a, i, col[a]);
        }
        // translation columns are unit vectors.
        for (int j = 0; j < 3; ++j)
            trips.emplace_back(3 * v + j, 3 + j, 1.0);
    }

    for (int b = 0; b < rig.shape_count(); ++b) {
        const BlendShape& s = rig.shapes[b];
        if (s.kind == ShapeKind::Delta) {
            for (int v = 0; v < n; ++v) {
                Eigen::Vector3d d = s.deltas.col(v);
                if (d.isZero(0.0))
                    continue;
                if (jt.present) {
                    const double sw = rig.jaw_skin_weights[v];
                    if (sw != 0.0)
                        d = (1.0 - sw) * d + sw * (jt.rotation * d);
                }
                const Eigen::Vector3d col = rd.R * d;
                for (int a = 0; a < 3; ++a)
                    if (col[a] != 0.0)
                        trips.emplace_back(3 * v + a, 6 + b, col[a]);
            }
        }
    }

    if (jt.present) {
        const Eigen::Matrix3d& A = rig.jaw_joint.axes;
        for (const auto& dof : jt.dofs) {
            for (int v = 0; v < n; ++v) {
                const double sw = rig.jaw_skin_weights[v];
                if (sw == 0.0)
                    continue;
                Eigen::Vector3d d;
                if (dof.is_rotation)
                    d = jt.drot[dof.axis] * (blend.col(v) - rig.jaw_joint.pivot);
                else
                    d = A.col(dof.axis);
                const Eigen::Vector3d col = rd.R * (sw * dof.scale * d);
                for (int a = 0; a < 3; ++a)
                    if (col[a] != 0.0)
                        trips.emplace_back(3 * v + a, 6 + dof.slot, col[a]);
            }
        }
    }

    Eigen::SparseMatrix<double, Eigen::RowMajor> J(3 * n, np);
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
}

} // namespace facefit
