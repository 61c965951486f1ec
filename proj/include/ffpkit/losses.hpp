#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ffpkit/autograd.hpp"
#include "ffpkit/common.hpp"
#include "ffpkit/dit.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

struct LossWeights {
    double lambda_motion = 5.0;
    double lambda_mmd = 1.0;

    void validate() const {
        check_arg(std::isfinite(lambda_motion) && lambda_motion >= 0.0,
                  "lambda_motion must be finite and >= 0");
        check_arg(std::isfinite(lambda_mmd) && lambda_mmd >= 0.0,
                  "lambda_mmd must be finite and >= 0");
    }
};

struct LossReport {
    double l_fm = 0.0;
    double l_motion = 0.0;
    double l_mmd = 0.0;
    double total = 0.0;
    LossWeights weights;
};

// Geometry of a token-form latent (frames*height*width rows, channels cols).
struct TapShape {
    int64_t frames = 0;
    int64_t height = 0;
    int64_t width = 0;
    int64_t channels = 0;

    int64_t tokens_per_frame() const { return height * width; }
    int64_t tokens() const { return frames * tokens_per_frame(); }

    void validate() const {
        check_arg(frames >= 1 && height >= 1 && width >= 1 && channels >= 1,
                  "tap shape dims must be positive");
    }

    void check_tokens(const Tensor& t, const std::string& what) const {
        check_arg(t.rank() == 2 && t.dim(0) == tokens() && t.dim(1) == channels,
                  what + " must be (" + std::to_string(tokens()) + "," +
                      std::to_string(channels) + "), got " + t.shape_str());
    }
};

constexpr double kBandwidthFloor = 1e-6;

// ---- value-level pieces ----

// Non-overlapping k x k mean pooling as a (pooled tokens, tokens) operator.
inline Tensor pool_matrix(int64_t height, int64_t width, int64_t k) {
    check_arg(k >= 1, "pooling factor must be >= 1");
    check_arg(height % k == 0 && width % k == 0, "pooling factor must divide height and width");
    const int64_t ph = height / k, pw = width / k;
    Tensor m({ph * pw, height * width});
    const double inv = 1.0 / double(k * k);
    for (int64_t py = 0; py < ph; ++py)
        for (int64_t px = 0; px < pw; ++px)
            for (int64_t dy = 0; dy < k; ++dy)
                for (int64_t dx = 0; dx < k; ++dx)
                    m.at(py * pw + px, (py * k + dy) * width + (px * k + dx)) = inv;
    return m;
}

// (F,H,W,C) -> (F,H/k,W/k,C) mean pooling.
inline Tensor spatial_downsample(const Tensor& video, int64_t k) {
    check_arg(video.rank() == 4, "spatial_downsample expects rank-4 (F,H,W,C)");
    const int64_t f = video.dim(0), h = video.dim(1), w = video.dim(2), c = video.dim(3);
    check_arg(k >= 1 && h % k == 0 && w % k == 0, "pooling factor must divide height and width");
    Tensor out({f, h / k, w / k, c});
    const double inv = 1.0 / double(k * k);
    for (int64_t fr = 0; fr < f; ++fr)
        for (int64_t py = 0; py < h / k; ++py)
            for (int64_t px = 0; px < w / k; ++px)
                for (int64_t ch = 0; ch < c; ++ch) {
                    double s = 0.0;
                    for (int64_t dy = 0; dy < k; ++dy)
                        for (int64_t dx = 0; dx < k; ++dx)
                            s += video.at4(fr, py * k + dy, px * k + dx, ch);
                    out.at4(fr, py, px, ch) = s * inv;
                }
    return out;
}

// S = z_first z_i^T: row r relates first-frame token r to every token of z_i.
inline Tensor similarity_matrix(const Tensor& z_first, const Tensor& z_i) {
    check_arg(z_first.rank() == 2 && z_first.same_shape(z_i),
              "similarity_matrix expects matching (N,C) inputs");
    return matmul_nt(z_first, z_i);
}

inline Tensor first_frame_of(const Tensor& video) {
    check_arg(video.rank() == 4, "expected rank-4 (F,H,W,C)");
    const int64_t per = video.dim(1) * video.dim(2) * video.dim(3);
    std::vector<double> data(video.data(), video.data() + per);
    return Tensor({1, video.dim(1), video.dim(2), video.dim(3)}, std::move(data));
}

// z_t = (1-t) clean + t noise.
inline Tensor interpolate_latent(const Tensor& clean, const Tensor& noise, double t) {
    check_arg(clean.same_shape(noise), "interpolation operands must share a shape");
    check_arg(std::isfinite(t), "timestep must be finite");
    Tensor out = clean;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * clean[i] + t * noise[i];
    return out;
}

// ---- graph-level losses ----

// Mean squared error against the velocity target (noise - clean).
inline ag::Id flow_match_loss(ag::Graph& g, ag::Id v_pred, const Tensor& clean,
                              const Tensor& noise) {
    check_arg(clean.same_shape(noise), "clean and noise shapes differ");
    const Tensor& pv = g.value(v_pred);
    check_arg(pv.size() == clean.size(), "velocity prediction shape mismatch");
    Tensor target(pv.shape());
    for (int64_t i = 0; i < target.size(); ++i) target[i] = noise[i] - clean[i];
    const ag::Id d = g.sub(v_pred, g.constant(target));
    return g.mean_all(g.mul(d, d));
}

// Channel-mean inner products between two (N,C) frames: (1/C) zi zj^T.
inline ag::Id gram_block(ag::Graph& g, ag::Id zi, ag::Id zj, int64_t channels) {
    return g.scale(g.matmul_nt(zi, zj), 1.0 / double(channels));
}

// Mean absolute Gram-block difference over ordered frame pairs, after k_s
// spatial pooling. The teacher side enters as a node the caller constructed
// without gradients, so the asymmetric gradient contract is the graph's.
inline ag::Id motion_loss(ag::Graph& g, ag::Id student, ag::Id teacher, const TapShape& shape,
                          int64_t k_s) {
    shape.validate();
    check_arg(shape.frames >= 2, "motion loss needs at least two frames");
    shape.check_tokens(g.value(student), "student tap");
    shape.check_tokens(g.value(teacher), "teacher tap");

    const int64_t n = shape.tokens_per_frame();
    const ag::Id pool = g.constant(pool_matrix(shape.height, shape.width, k_s));
    std::vector<ag::Id> zs, zt;
    for (int64_t f = 0; f < shape.frames; ++f) {
        zs.push_back(g.matmul(pool, g.rows(student, f * n, n)));
        zt.push_back(g.matmul(pool, g.rows(teacher, f * n, n)));
    }

    ag::Id acc = -1;
    for (int64_t i = 0; i < shape.frames; ++i)
        for (int64_t j = 0; j < shape.frames; ++j) {
            if (i == j) continue;
            const ag::Id gs = gram_block(g, zs[size_t(i)], zs[size_t(j)], shape.channels);
            const ag::Id gt = gram_block(g, zt[size_t(i)], zt[size_t(j)], shape.channels);
            const ag::Id term = g.mean_all(g.abs(g.sub(gs, gt)));
            acc = acc < 0 ? term : g.add(acc, term);
        }
    return g.scale(acc, 1.0 / double(shape.frames * (shape.frames - 1)));
}

// Median pairwise distance over the pooled rows of p and q, floored at
// kBandwidthFloor. The median element is chosen from forward values (lower
// median, ties broken by index), and the gradient flows through that pair.
inline ag::Id median_bandwidth(ag::Graph& g, ag::Id p, ag::Id q) {
    const ag::Id pooled = g.concat_rows({p, q});
    const ag::Id sq = g.pairwise_sqdist(pooled, pooled);
    const Tensor& sv = g.value(sq);
    const int64_t rows = sv.dim(0);
    check_arg(rows >= 2, "bandwidth needs at least two pooled rows");

    std::vector<int64_t> idx;
    idx.reserve(size_t(rows * (rows - 1) / 2));
    for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = i + 1; j < rows; ++j) idx.push_back(i * rows + j);
    std::sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
        if (sv[a] != sv[b]) return sv[a] < sv[b];
        return a < b;
    });
    const int64_t median = idx[(idx.size() - 1) / 2];
    return g.clamp_min(g.sqrt(g.gather(sq, median)), kBandwidthFloor);
}

// Biased V-statistic MMD^2 with an RBF kernel of bandwidth sigma.
inline ag::Id mmd2(ag::Graph& g, ag::Id p, ag::Id q, ag::Id sigma) {
    const Tensor& pv = g.value(p);
    const Tensor& qv = g.value(q);
    check_arg(pv.rank() == 2 && qv.rank() == 2 && pv.dim(1) == qv.dim(1),
              "mmd2 expects row sets of equal dimension");
    check_arg(pv.dim(0) >= 1 && qv.dim(0) >= 1, "mmd2 needs at least one row per side");
    check_arg(g.value(sigma).size() == 1 && g.value(sigma)[0] > 0.0,
              "kernel bandwidth must be a positive scalar");

    const ag::Id den = g.scale(g.mul(sigma, sigma), 2.0);
    auto kernel_mean = [&](ag::Id a, ag::Id b) {
        const ag::Id sq = g.pairwise_sqdist(a, b);
        return g.mean_all(g.exp(g.scale(g.div_scalar(sq, den), -1.0)));
    };
    const ag::Id kpp = kernel_mean(p, p);
    const ag::Id kqq = kernel_mean(q, q);
    const ag::Id kpq = kernel_mean(p, q);
    return g.sub(g.add(kpp, kqq), g.scale(kpq, 2.0));
}

struct DriftNodes {
    std::vector<ag::Id> d;
    std::vector<ag::Id> sigma;
};

// d_i = MMD^2(rows of S_1, rows of S_i) for latent frames i = 2..F, where
// S_i = z_first z_i^T and the bandwidth is recomputed per pair.
inline DriftNodes drift_scores(ag::Graph& g, ag::Id tap, const TapShape& shape) {
    shape.validate();
    check_arg(shape.frames >= 2, "drift scores need at least two frames");
    shape.check_tokens(g.value(tap), "tap");

    const int64_t n = shape.tokens_per_frame();
    const ag::Id z1 = g.rows(tap, 0, n);
    const ag::Id s1 = g.matmul_nt(z1, z1);

    DriftNodes out;
    for (int64_t f = 1; f < shape.frames; ++f) {
        const ag::Id zi = g.rows(tap, f * n, n);
        const ag::Id si = g.matmul_nt(z1, zi);
        const ag::Id sigma = median_bandwidth(g, s1, si);
        out.sigma.push_back(sigma);
        out.d.push_back(mmd2(g, s1, si, sigma));
    }
    return out;
}

// Sum_i |d_i - d_hat_i| against fixed teacher drift values.
inline ag::Id mmd_loss_from_scores(ag::Graph& g, const std::vector<ag::Id>& d,
                                   const std::vector<double>& d_hat) {
    check_arg(!d.empty() && d.size() == d_hat.size(), "drift sequences must match and be nonempty");
    ag::Id acc = -1;
    for (size_t i = 0; i < d.size(); ++i) {
        const ag::Id term = g.abs(g.sub(d[i], g.constant(Tensor::scalar(d_hat[i]))));
        acc = acc < 0 ? term : g.add(acc, term);
    }
    return acc;
}

// Sum_i |d_i - d_hat_i| with both drift sequences computed in-graph; the
// teacher node carries no gradients by construction.
inline ag::Id mmd_loss(ag::Graph& g, ag::Id student, ag::Id teacher, const TapShape& shape) {
    const DriftNodes ds = drift_scores(g, student, shape);
    const DriftNodes dt = drift_scores(g, teacher, shape);
    ag::Id acc = -1;
    for (size_t i = 0; i < ds.d.size(); ++i) {
        const ag::Id term = g.abs(g.sub(ds.d[i], dt.d[i]));
        acc = acc < 0 ? term : g.add(acc, term);
    }
    return acc;
}

struct TotalLoss {
    ag::Id node = -1;
    LossReport report;
};

// total = l_fm + lambda_motion * l_motion + lambda_mmd * l_mmd. Pass -1 for
// an absent distillation term (it contributes exactly zero).
inline TotalLoss total_loss(ag::Graph& g, ag::Id l_fm, ag::Id l_motion, ag::Id l_mmd,
                            const LossWeights& weights) {
    weights.validate();
    auto part = [&](ag::Id id, const char* name) {
        if (id < 0) return 0.0;
        const double v = g.value(id)[0];
        check(std::isfinite(v), ErrorCode::numeric_error,
              std::string(name) + " loss is not finite");
        return v;
    };
    TotalLoss out;
    out.report.weights = weights;
    out.report.l_fm = part(l_fm, "flow");
    out.report.l_motion = part(l_motion, "motion");
    out.report.l_mmd = part(l_mmd, "drift");

    check_arg(l_fm >= 0, "total loss requires the flow term");
    ag::Id total = l_fm;
    if (l_motion >= 0) total = g.add(total, g.scale(l_motion, weights.lambda_motion));
    if (l_mmd >= 0) total = g.add(total, g.scale(l_mmd, weights.lambda_mmd));
    out.node = total;
    out.report.total = g.value(total)[0];
    check(std::isfinite(out.report.total), ErrorCode::numeric_error, "total loss is not finite");
    return out;
}

struct TeacherTaps {
    std::vector<int64_t> blocks;
    std::vector<Tensor> taps;
    RopeCoefficients coeffs;
};

// Identity-propagation teacher: the target clip serves as its own source
// and supplies its own first frame. Shares the student's noise and t; runs
// on a non-recording graph, so every output is detached.
inline TeacherTaps teacher_forward(const DitParams& params, const Tensor& target,
                                   const Tensor& noise, double t, RopeMode mode,
                                   const HeadPartition* partition) {
    check_arg(target.rank() == 4 && target.same_shape(noise),
              "target and noise must be rank-4 with equal shapes");
    const Tensor noisy = interpolate_latent(target, noise, t);
    const Tensor composite = assemble_conditioning(noisy, target, first_frame_of(target));

    ag::Graph g(false);
    const DitNodes nodes = bind_dit(g, params, false);
    ag::Id alpha_s = -1, alpha_t = -1;
    TeacherTaps out;
    if (mode == RopeMode::ast) {
        const int64_t tokens = target.dim(0) * target.dim(1) * target.dim(2);
        const ag::Id z_src = g.constant(target.reshaped({tokens, target.dim(3)}));
        const PredictedCoefficients pc = predict_coefficients(g, z_src, nodes.coef);
        alpha_s = pc.alpha_s;
        alpha_t = pc.alpha_t;
        out.coeffs = pc.values;
    }
    const DitOutput fwd =
        dit_forward(g, nodes, params.cfg, composite, t, mode, partition, alpha_s, alpha_t);
    out.blocks = fwd.tap_blocks;
    for (ag::Id tap : fwd.taps) out.taps.push_back(g.value(tap));
    return out;
}

}  // namespace ffpkit
