/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/flow.cpp
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
#include "facefit/flow.h"

#include <cmath>
#include <vector>

namespace facefit {

namespace {

using Arr = Eigen::ArrayXXd;

struct Tap
{
    int i0, i1;
    double w0, w1;
    bool interior; // position strictly inside [0, size-1]
};

Tap tap(double q, int size)
{
    Tap t;
    if (q <= 0.0) {
        t.i0 = t.i1 = 0;
        t.w0 = 1.0;
        t.w1 = 0.0;
        t.interior = false;
        return t;
    }
    if (q >= size - 1) {
        t.i0 = t.i1 = size - 1;
        t.w0 = 1.0;
        t.w1 = 0.0;
        t.interior = false;
        return t;
    }
    const double f = std::floor(q);
    t.i0 = static_cast<int>(f);
    t.i1 = t.i0 + 1;
    t.w1 = q - f;
    t.w0 = 1.0 - t.w1;
    t.interior = true;
    return t;
}

double sample(const Arr& img, double x, double y)
{
    const Tap tx = tap(x, static_cast<int>(img.cols()));
    const Tap ty = tap(y, static_cast<int>(img.rows()));
    return ty.w0 * (tx.w0 * img(ty.i0, tx.i0) + tx.w1 * img(ty.i0, tx.i1)) +
           ty.w1 * (tx.w0 * img(ty.i1, tx.i0) + tx.w1 * img(ty.i1, tx.i1));
}

// Spatial derivative of the bilinear surface at a continuous position
// (zero outside the grid, consistent with the clamped sample).
Eigen::Vector2d sample_gradient(const Arr& img, double x, double y)
{
    const Tap tx = tap(x, static_cast<int>(img.cols()));
    const Tap ty = tap(y, static_cast<int>(img.rows()));
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    if (tx.interior)
        g.x() = ty.w0 * (img(ty.i0, tx.i1) - img(ty.i0, tx.i0)) +
                ty.w1 * (img(ty.i1, tx.i1) - img(ty.i1, tx.i0));
    if (ty.interior)
        g.y() = tx.w0 * (img(ty.i1, tx.i0) - img(ty.i0, tx.i0)) +
                tx.w1 * (img(ty.i1, tx.i1) - img(ty.i0, tx.i1));
    return g;
}

void scatter(Arr& img, double x, double y, double v)
{
    const Tap tx = tap(x, static_cast<int>(img.cols()));
    const Tap ty = tap(y, static_cast<int>(img.rows()));
    img(ty.i0, tx.i0) += ty.w0 * tx.w0 * v;
    img(ty.i0, tx.i1) += ty.w0 * tx.w1 * v;
    img(ty.i1, tx.i0) += ty.w1 * tx.w0 * v;
    img(ty.i1, tx.i1) += ty.w1 * tx.w1 * v;
}

Arr warp(const Arr& img, const Arr& u, const Arr& v)
{
    Arr out(img.rows(), img.cols());
    for (int y = 0; y < img.rows(); ++y)
        for (int x = 0; x < img.cols(); ++x)
            out(y, x) = sample(img, x + u(y, x), y + v(y, x));
    return out;
}

Arr boxavg(const Arr& in)
{
    const int h = static_cast<int>(in.rows());
    const int w = static_cast<int>(in.cols());
    Arr out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            int cnt = 0;
            if (x > 0) { sum += in(y, x - 1); ++cnt; }
            if (x < w - 1) { sum += in(y, x + 1); ++cnt; }
            if (y > 0) { sum += in(y - 1, x); ++cnt; }
            if (y < h - 1) { sum += in(y + 1, x); ++cnt; }
            out(y, x) = sum / cnt;
        }
    }
    return out;
}

Arr boxavg_adjoint(const Arr& cot)
{
    const int h = static_cast<int>(cot.rows());
    const int w = static_cast<int>(cot.cols());
    Arr out = Arr::Zero(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int cnt = 0;
            if (x > 0) ++cnt;
            if (x < w - 1) ++cnt;
            if (y > 0) ++cnt;
            if (y < h - 1) ++cnt;
            const double v = cot(y, x) / cnt;
            if (x > 0) out(y, x - 1) += v;
            if (x < w - 1) out(y, x + 1) += v;
            if (y > 0) out(y - 1, x) += v;
            if (y < h - 1) out(y + 1, x) += v;
        }
    }
    return out;
}

struct LevelState
{
    Arr I1, I2, W2, Ix, Iy, It, D;
    Arr wu_in, wv_in;              // flow entering the level, after upsample
    std::vector<Arr> du_seq, dv_seq; // increment before each iteration (K+1 entries)
};

struct Trace
{
    std::vector<Arr> pyr1, pyr2; // index 0 = finest
    std::vector<LevelState> levels;
    int in_h = 0, in_w = 0, channels = 0;
};

Arr input_to_gray(const Image& img, int resolution)
{
    const Arr g = to_gray(img);
    if (img.height() == resolution && img.width() == resolution)
        return g;
    return upsample_bilinear(g, resolution, resolution);
}

Image gray_to_input_adjoint(const Arr& cot, int in_h, int in_w, int channels)
{
    if (static_cast<int>(cot.rows()) == in_h && static_cast<int>(cot.cols()) == in_w)
        return to_gray_adjoint(cot, channels);
    return to_gray_adjoint(upsample_bilinear_adjoint(cot, in_h, in_w), channels);
}

// Runs the full coarse-to-fine solve. When trace is non-null every
// intermediate needed by the adjoint pass is kept. When tangents are
// supplied (forward mode) the linearization is propagated alongside.
struct TangentPair
{
    Arr u, v;
};

FlowField forward(const VariationalFlowOptions& opt, const Image& a, const Image& b, Trace* trace,
                  const Arr* da, const Arr* db, TangentPair* tangent_out)
{
    const int L = opt.levels;
    std::vector<Arr> pyr1(L), pyr2(L), tpyr1, tpyr2;
    pyr1[0] = input_to_gray(a, opt.resolution);
    pyr2[0] = input_to_gray(b, opt.resolution);
    for (int l = 1; l < L; ++l) {
        pyr1[l] = downsample2x(pyr1[l - 1]);
        pyr2[l] = downsample2x(pyr2[l - 1]);
    }
    const bool fwd_mode = tangent_out != nullptr;
    if (fwd_mode) {
        tpyr1.resize(L);
        tpyr2.resize(L);
        tpyr1[0] = da ? *da : Arr::Zero(opt.resolution, opt.resolution);
        tpyr2[0] = db ? *db : Arr::Zero(opt.resolution, opt.resolution);
        for (int l = 1; l < L; ++l) {
            tpyr1[l] = downsample2x(tpyr1[l - 1]);
            tpyr2[l] = downsample2x(tpyr2[l - 1]);
        }
    }
    if (trace) {
        trace->pyr1 = pyr1;
        trace->pyr2 = pyr2;
        trace->levels.resize(L);
    }

    Arr wu, wv, twu, twv;
    for (int l = L - 1; l >= 0; --l) {
        const Arr& I1 = pyr1[l];
        const Arr& I2 = pyr2[l];
        const int h = static_cast<int>(I1.rows());
        const int w = static_cast<int>(I1.cols());
        if (l == L - 1) {
            wu = Arr::Zero(h, w);
            wv = Arr::Zero(h, w);
            if (fwd_mode) {
                twu = Arr::Zero(h, w);
                twv = Arr::Zero(h, w);
            }
        } else {
            wu = 2.0 * upsample_bilinear(wu, h, w);
            wv = 2.0 * upsample_bilinear(wv, h, w);
            if (fwd_mode) {
                twu = 2.0 * upsample_bilinear(twu, h, w);
                twv = 2.0 * upsample_bilinear(twv, h, w);
            }
        }

        Arr W2(h, w), tW2;
        if (fwd_mode)
            tW2.resize(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double px = x + wu(y, x);
                const double py = y + wv(y, x);
                W2(y, x) = sample(I2, px, py);
                if (fwd_mode) {
                    const Eigen::Vector2d g = sample_gradient(I2, px, py);
                    tW2(y, x) = sample(tpyr2[l], px, py) + g.x() * twu(y, x) + g.y() * twv(y, x);
                }
            }
        }
        const Arr Iavg = 0.5 * (I1 + W2);
        const Arr Ix = grad_x(Iavg);
        const Arr Iy = grad_y(Iavg);
        const Arr It = W2 - I1;
        const Arr D = opt.smoothness + Ix.square() + Iy.square();

        Arr tIx, tIy, tIt, tD;
        if (fwd_mode) {
            const Arr tIavg = 0.5 * (tpyr1[l] + tW2);
            tIx = grad_x(tIavg);
            tIy = grad_y(tIavg);
            tIt = tW2 - tpyr1[l];
            tD = 2.0 * (Ix * tIx + Iy * tIy);
        }

        Arr du = Arr::Zero(h, w), dv = Arr::Zero(h, w);
        Arr tdu, tdv;
        if (fwd_mode) {
            tdu = Arr::Zero(h, w);
            tdv = Arr::Zero(h, w);
        }
        LevelState* st = trace ? &trace->levels[l] : nullptr;
        if (st) {
            st->I1 = I1;
            st->I2 = I2;
            st->W2 = W2;
            st->Ix = Ix;
            st->Iy = Iy;
            st->It = It;
            st->D = D;
            st->wu_in = wu;
            st->wv_in = wv;
            st->du_seq.reserve(opt.iterations + 1);
            st->dv_seq.reserve(opt.iterations + 1);
            st->du_seq.push_back(du);
            st->dv_seq.push_back(dv);
        }
        for (int k = 0; k < opt.iterations; ++k) {
            const Arr au = boxavg(du);
            const Arr av = boxavg(dv);
            const Arr s = Ix * au + Iy * av + It;
            const Arr r = s / D;
            du = au - Ix * r;
            dv = av - Iy * r;
            if (fwd_mode) {
                const Arr tau = boxavg(tdu);
                const Arr tav = boxavg(tdv);
                const Arr ts = tIx * au + Ix * tau + tIy * av + Iy * tav + tIt;
                const Arr tr = ts / D - r * tD / D;
                tdu = tau - tIx * r - Ix * tr;
                tdv = tav - tIy * r - Iy * tr;
            }
            if (st) {
                st->du_seq.push_back(du);
                st->dv_seq.push_back(dv);
            }
        }
        wu += du;
        wv += dv;
        if (fwd_mode) {
            twu += tdu;
            twv += tdv;
        }
    }
    FlowField out;
    out.u = wu;
    out.v = wv;
    if (fwd_mode) {
        tangent_out->u = twu;
        tangent_out->v = twv;
    }
    return out;
}

} // namespace

void FlowField::validate(int resolution) const
{
    if (resolution_y() != resolution || resolution_x() != resolution)
        throw FaceFitError("flow field does not match the configured flow resolution");
    if (!u.allFinite() || !v.allFinite())
        throw FaceFitError("flow field contains non-finite values");
}

void VariationalFlowOptions::validate() const
{
    if (levels < 1 || iterations < 1 || !(smoothness > 0.0))
        throw FaceFitError("invalid variational flow options");
    int size = resolution;
    for (int l = 1; l < levels; ++l) {
        if (size % 2 != 0)
            throw FaceFitError("flow resolution must halve cleanly across pyramid levels");
        size /= 2;
    }
    if (size < 8)
        throw FaceFitError("flow pyramid too deep for the configured resolution");
}

VariationalFlowBackend::VariationalFlowBackend(VariationalFlowOptions options) : options_(options)
{
    options_.validate();
}

FlowField VariationalFlowBackend::flow(const Image& a, const Image& b) const
{
    if (a.height() != b.height() || a.width() != b.width())
        throw FaceFitError("flow inputs must have the same size");
    return forward(options_, a, b, nullptr, nullptr, nullptr, nullptr);
}

FlowField VariationalFlowBackend::flow_jvp(const Image& a, const Image& b, const Image* tangent_a,
                                           const Image* tangent_b) const
{
    Arr da, db;
    const Arr* pda = nullptr;
    const Arr* pdb = nullptr;
    if (tangent_a) {
        da = input_to_gray(*tangent_a, options_.resolution);
        pda = &da;
    }
    if (tangent_b) {
        db = input_to_gray(*tangent_b, options_.resolution);
        pdb = &db;
    }
    TangentPair t;
    forward(options_, a, b, nullptr, pda, pdb, &t);
    FlowField out;
    out.u = std::move(t.u);
    out.v = std::move(t.v);
    return out;
}

void VariationalFlowBackend::flow_vjp(const Image& a, const Image& b, const FlowField& cot,
                                      Image* cot_a, Image* cot_b) const
{
    cot.validate(options_.resolution);
    Trace trace;
    trace.in_h = a.height();
    trace.in_w = a.width();
    trace.channels = a.channels();
    forward(options_, a, b, &trace, nullptr, nullptr, nullptr);

    const int L = options_.levels;
    const int K = options_.iterations;
    std::vector<Arr> g1(L), g2(L); // per-level image cotangents
    Arr wu_hat = cot.u;
    Arr wv_hat = cot.v;

    for (int l = 0; l < L; ++l) { // finest to coarsest, reverse of forward
        const LevelState& st = trace.levels[l];
        const int h = static_cast<int>(st.I1.rows());
        const int w = static_cast<int>(st.I1.cols());

        // w_out = w_in + d_K
        Arr du_hat = wu_hat;
        Arr dv_hat = wv_hat;
        Arr wu_in_hat = wu_hat;
        Arr wv_in_hat = wv_hat;

        Arr Ix_hat = Arr::Zero(h, w), Iy_hat = Arr::Zero(h, w), It_hat = Arr::Zero(h, w);
        Arr D_hat = Arr::Zero(h, w);
        for (int k = K - 1; k >= 0; --k) {
            const Arr& du_in = st.du_seq[k];
            const Arr& dv_in = st.dv_seq[k];
            const Arr au = boxavg(du_in);
            const Arr av = boxavg(dv_in);
            const Arr s = st.Ix * au + st.Iy * av + st.It;
            const Arr r = s / st.D;

            Arr au_hat = du_hat;
            Arr av_hat = dv_hat;
            const Arr r_hat = -(st.Ix * du_hat + st.Iy * dv_hat);
            Ix_hat += -r * du_hat;
            Iy_hat += -r * dv_hat;
            const Arr s_hat = r_hat / st.D;
            D_hat += -r_hat * r / st.D;
            Ix_hat += s_hat * au;
            Iy_hat += s_hat * av;
            It_hat += s_hat;
            au_hat += s_hat * st.Ix;
            av_hat += s_hat * st.Iy;
            du_hat = boxavg_adjoint(au_hat);
            dv_hat = boxavg_adjoint(av_hat);
        }
        // d_0 = 0, so du_hat/dv_hat end here.
        Ix_hat += 2.0 * st.Ix * D_hat;
        Iy_hat += 2.0 * st.Iy * D_hat;
        const Arr Iavg_hat = grad_x_adjoint(Ix_hat) + grad_y_adjoint(Iy_hat);
        const Arr W2_hat = 0.5 * Iavg_hat + It_hat;
        Arr I1_hat = 0.5 * Iavg_hat - It_hat;

        // W2 = warp(I2, w_in): scatter the image part, and feed the flow part
        // through the sampled spatial gradient.
        Arr I2_hat = Arr::Zero(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double vhat = W2_hat(y, x);
                if (vhat == 0.0)
                    continue;
                const double px = x + st.wu_in(y, x);
                const double py = y + st.wv_in(y, x);
                scatter(I2_hat, px, py, vhat);
                const Eigen::Vector2d g = sample_gradient(st.I2, px, py);
                wu_in_hat(y, x) += vhat * g.x();
                wv_in_hat(y, x) += vhat * g.y();
            }
        }
        g1[l] = I1_hat;
        g2[l] = I2_hat;

        if (l < L - 1) {
            // w_in = 2 * upsample(w of the coarser level)
            const int ch = static_cast<int>(trace.levels[l + 1].I1.rows());
            const int cw = static_cast<int>(trace.levels[l + 1].I1.cols());
            wu_hat = 2.0 * upsample_bilinear_adjoint(wu_in_hat, ch, cw);
            wv_hat = 2.0 * upsample_bilinear_adjoint(wv_in_hat, ch, cw);
        }
    }

    // Pyramid adjoints, coarsest back to finest.
    Arr acc1 = g1[L - 1];
    Arr acc2 = g2[L - 1];
    for (int l = L - 2; l >= 0; --l) {
        acc1 = downsample2x_adjoint(acc1) + g1[l];
        acc2 = downsample2x_adjoint(acc2) + g2[l];
    }
    if (cot_a)
        *cot_a = gray_to_input_adjoint(acc1, trace.in_h, trace.in_w, trace.channels);
    if (cot_b)
        *cot_b = gray_to_input_adjoint(acc2, trace.in_h, trace.in_w, trace.channels);
}

} // namespace facefit
