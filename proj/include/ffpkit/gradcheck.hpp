#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ffpkit/autograd.hpp"
#include "ffpkit/common.hpp"
#include "ffpkit/dit.hpp"
#include "ffpkit/losses.hpp"
#include "ffpkit/rng.hpp"

namespace ffpkit {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst;  // "input{k}[{i}]" of the offending coordinate
};

using LossBuilder = std::function<ag::Id(ag::Graph&, const std::vector<ag::Id>&)>;

// Central finite differences on every coordinate of every input versus the
// analytic reverse-mode gradient. The error is relative to the larger of the
// two magnitudes, floored at 1e-8 so agreeing near-zero gradients pass.
// Differences inside the rounding band of the difference quotient itself,
// about eps * |loss| / h, are unresolvable by any finite-difference probe
// and count as zero.
inline GradCheckResult max_rel_error(const std::vector<Tensor>& inputs, const LossBuilder& build,
                                     double h) {
    check_arg(h > 0.0, "step size must be positive");

    const auto eval = [&](const std::vector<Tensor>& xs) {
        ag::Graph g(false);
        std::vector<ag::Id> ids;
        ids.reserve(xs.size());
        for (const Tensor& x : xs) ids.push_back(g.input(x));
        const ag::Id loss = build(g, ids);
        check_arg(g.value(loss).size() == 1, "loss must be scalar");
        return g.value(loss)[0];
    };
    const double noise_band =
        64.0 * std::numeric_limits<double>::epsilon() * std::fabs(eval(inputs)) / (2.0 * h);

    std::vector<Tensor> analytic;
    {
        ag::Graph g(true);
        std::vector<ag::Id> ids;
        for (const Tensor& x : inputs) ids.push_back(g.input(x, true));
        const ag::Id loss = build(g, ids);
        g.backward(loss);
        for (ag::Id id : ids) analytic.push_back(g.grad_or_zeros(id));
    }

    GradCheckResult res;
    std::vector<Tensor> work = inputs;
    for (size_t k = 0; k < work.size(); ++k) {
        for (int64_t i = 0; i < work[k].size(); ++i) {
            const double saved = work[k][i];
            work[k][i] = saved + h;
            const double fp = eval(work);
            work[k][i] = saved - h;
            const double fm = eval(work);
            work[k][i] = saved;

            const double fd = (fp - fm) / (2.0 * h);
            const double ga = analytic[k][i];
            const double err = std::max(0.0, std::fabs(ga - fd) - noise_band);
            const double rel = err / std::max({std::fabs(ga), std::fabs(fd), 1e-8});
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = "input" + std::to_string(k) + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

namespace detail {

struct GradCheckFixture {
    std::vector<Tensor> inputs;
    LossBuilder build;
};

// Shapes follow the documented check contract: 3 latent frames on a 2x2
// token grid with 4 channels.
inline GradCheckFixture loss_fixture(const std::string& component) {
    Rng rng(0xF1D0);
    const TapShape shape{3, 2, 2, 4};
    Tensor student({shape.tokens(), shape.channels});
    Tensor teacher({shape.tokens(), shape.channels});
    Tensor clean({shape.tokens(), shape.channels});
    Tensor noise({shape.tokens(), shape.channels});
    for (Tensor* t : {&student, &teacher, &clean, &noise}) t->fill_normal(rng);

    GradCheckFixture fx;
    if (component == "flow") {
        fx.inputs = {student};
        fx.build = [clean, noise](ag::Graph& g, const std::vector<ag::Id>& in) {
            return flow_match_loss(g, in[0], clean, noise);
        };
    } else if (component == "motion") {
        fx.inputs = {student};
        fx.build = [teacher, shape](ag::Graph& g, const std::vector<ag::Id>& in) {
            return motion_loss(g, in[0], g.constant(teacher), shape, 1);
        };
    } else if (component == "mmd") {
        fx.inputs = {student};
        fx.build = [teacher, shape](ag::Graph& g, const std::vector<ag::Id>& in) {
            return mmd_loss(g, in[0], g.constant(teacher), shape);
        };
    } else if (component == "total") {
        fx.inputs = {student, student};
        fx.build = [clean, noise, teacher, shape](ag::Graph& g,
                                                  const std::vector<ag::Id>& in) {
            const ag::Id fm = flow_match_loss(g, in[0], clean, noise);
            const ag::Id mo = motion_loss(g, in[1], g.constant(teacher), shape, 1);
            const ag::Id md = mmd_loss(g, in[1], g.constant(teacher), shape);
            return total_loss(g, fm, mo, md, LossWeights{}).node;
        };
    } else if (component == "linear") {
        // Power-of-two values with cancelling products keep every partial sum
        // exactly representable, so central differences agree to a few ulps.
        const Tensor coeff({6}, {1.0, -1.0, 2.0, -2.0, 0.5, -0.5});
        const Tensor x({6}, {0.00390625, 0.00390625, 0.001953125, 0.001953125, 0.0078125,
                             0.0078125});
        fx.inputs = {x};
        fx.build = [coeff](ag::Graph& g, const std::vector<ag::Id>& in) {
            return g.sum_all(g.mul(in[0], g.constant(coeff)));
        };
    } else {
        fail(ErrorCode::invalid_argument,
             "unknown component '" + component +
                 "' (expected flow, motion, mmd, total, linear, or model-flow)");
    }
    return fx;
}

// Flow-matching loss through a 2-block width-32 model, differentiated with
// respect to every parameter tensor.
inline GradCheckFixture model_flow_fixture() {
    DitConfig cfg;
    cfg.blocks = 2;
    cfg.dim = 32;
    cfg.heads = 2;
    cfg.frames = 2;
    cfg.height = 2;
    cfg.width = 2;
    cfg.channels = 3;
    cfg.predictor_hidden = 8;

    Rng rng(0xF1D1);
    DitParams params = DitParams::init(cfg, rng);
    // The unpatch projection starts at zero; leave it there and every block
    // parameter would have an identically zero gradient, proving nothing.
    params.out_w.fill_normal(rng, 0.5);
    params.out_b.fill_normal(rng, 0.1);

    Tensor clean({cfg.frames, cfg.height, cfg.width, cfg.channels});
    Tensor noise(clean.shape());
    Tensor source(clean.shape());
    Tensor first({1, cfg.height, cfg.width, cfg.channels});
    for (Tensor* t : {&clean, &noise, &source, &first}) t->fill_normal(rng);
    const double t = 0.4;
    const Tensor composite = assemble_conditioning(interpolate_latent(clean, noise, t), source,
                                                   first);
    const Tensor clean_rows = clean.reshaped({cfg.tokens(), cfg.channels});
    const Tensor noise_rows = noise.reshaped({cfg.tokens(), cfg.channels});

    GradCheckFixture fx;
    params.visit([&](const std::string&, const Tensor& p) { fx.inputs.push_back(p); });
    fx.build = [cfg, composite, t, clean_rows, noise_rows](ag::Graph& g,
                                                           const std::vector<ag::Id>& in) {
        DitNodes nodes;
        nodes.blocks.resize(size_t(cfg.blocks));
        size_t k = 0;
        nodes.visit([&](const std::string&, ag::Id& id) { id = in[k++]; });
        const DitOutput fwd =
            dit_forward(g, nodes, cfg, composite, t, RopeMode::baseline, nullptr, -1, -1);
        return flow_match_loss(g, fwd.velocity, clean_rows, noise_rows);
    };
    return fx;
}

}  // namespace detail

// Named-component interface behind the grad-check command.
inline GradCheckResult grad_check(const std::string& component, double h) {
    detail::GradCheckFixture fx = component == "model-flow" ? detail::model_flow_fixture()
                                                            : detail::loss_fixture(component);
    return max_rel_error(fx.inputs, fx.build, h);
}

}  // namespace ffpkit
