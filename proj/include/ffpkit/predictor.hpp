#pragma once

#include <cstdint>

#include "ffpkit/autograd.hpp"
#include "ffpkit/common.hpp"
#include "ffpkit/rng.hpp"
#include "ffpkit/rope.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

constexpr int64_t kPredictorHidden = 64;

// Two-layer MLP over the mean-pooled source latent. The output layer is
// zero-initialized so both coefficients start at exactly 1.
struct CoefficientPredictorParams {
    Tensor w1, b1, w2, b2;

    static CoefficientPredictorParams init(int64_t channels, Rng& rng,
                                           int64_t hidden = kPredictorHidden) {
        check_arg(channels >= 1, "predictor needs at least one channel");
        check_arg(hidden >= 1, "predictor hidden width must be positive");
        CoefficientPredictorParams p;
        p.w1 = Tensor({channels, hidden});
        p.w1.fill_normal(rng, 1.0 / std::sqrt(double(channels)));
        p.b1 = Tensor({1, hidden});
        p.w2 = Tensor({hidden, 2});
        p.b2 = Tensor({1, 2});
        return p;
    }

    int64_t channels() const { return w1.empty() ? 0 : w1.dim(0); }

    // Canonical enumeration order shared by the optimizer and checkpoints.
    template <typename F>
    void visit(F&& f) {
        f("coef.w1", w1);
        f("coef.b1", b1);
        f("coef.w2", w2);
        f("coef.b2", b2);
    }
};

struct CoefficientPredictorNodes {
    ag::Id w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

inline CoefficientPredictorNodes bind_predictor(ag::Graph& g, const CoefficientPredictorParams& p,
                                                bool requires_grad) {
    CoefficientPredictorNodes n;
    n.w1 = g.input(p.w1, requires_grad);
    n.b1 = g.input(p.b1, requires_grad);
    n.w2 = g.input(p.w2, requires_grad);
    n.b2 = g.input(p.b2, requires_grad);
    return n;
}

struct PredictedCoefficients {
    ag::Id alpha_s = -1;
    ag::Id alpha_t = -1;
    RopeCoefficients values;
};

// z_src: (tokens, channels) source-latent tokens. Coefficients are
// 2*sigmoid(logit), so each lies in (0, 2) for any finite input.
inline PredictedCoefficients predict_coefficients(ag::Graph& g, ag::Id z_src,
                                                  const CoefficientPredictorNodes& n) {
    const Tensor& zv = g.value(z_src);
    check_arg(zv.rank() == 2, "predictor input must be rank-2 tokens");
    check_arg(zv.dim(1) == g.value(n.w1).dim(0), "predictor channel mismatch");

    const ag::Id pooled = g.mean_rows(z_src);
    const ag::Id hidden = g.gelu(g.linear(pooled, n.w1, n.b1));
    const ag::Id logits = g.linear(hidden, n.w2, n.b2);
    const ag::Id alphas = g.scale(g.sigmoid(logits), 2.0);

    PredictedCoefficients out;
    out.alpha_s = g.gather(alphas, 0);
    out.alpha_t = g.gather(alphas, 1);
    out.values.alpha_s = g.value(out.alpha_s)[0];
    out.values.alpha_t = g.value(out.alpha_t)[0];
    out.values.validate();
    return out;
}

}  // namespace ffpkit
