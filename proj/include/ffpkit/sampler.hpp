#pragma once

#include <cstdint>

#include "ffpkit/dit.hpp"
#include "ffpkit/losses.hpp"
#include "ffpkit/taxonomy.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

namespace detail {

inline Tensor velocity_at(const DitParams& params, const Tensor& z, const Tensor& source,
                          const Tensor& first, double t, RopeMode mode,
                          const HeadPartition* partition) {
    const DitConfig& cfg = params.cfg;
    ag::Graph g(false);
    const DitNodes nodes = bind_dit(g, params, false);
    ag::Id alpha_s = -1, alpha_t = -1;
    if (mode == RopeMode::ast) {
        const ag::Id z_src =
            g.constant(source.reshaped({cfg.tokens(), cfg.channels}));
        const PredictedCoefficients pc = predict_coefficients(g, z_src, nodes.coef);
        alpha_s = pc.alpha_s;
        alpha_t = pc.alpha_t;
    }
    const Tensor composite = assemble_conditioning(z, source, first);
    const DitOutput fwd =
        dit_forward(g, nodes, cfg, composite, t, mode, partition, alpha_s, alpha_t);
    return g.value(fwd.velocity)
        .reshaped({cfg.frames, cfg.height, cfg.width, cfg.channels});
}

}  // namespace detail

// Deterministic midpoint integration of dz/dt = v(z,t) from t=1 (pure noise)
// down to t=0, under fixed source and first-frame conditioning.
inline Tensor sample_video(const DitParams& params, const Tensor& source_latent,
                           const Tensor& first_latent, const Tensor& noise, RopeMode mode,
                           const HeadPartition* partition, int64_t steps = 20) {
    check_arg(steps >= 1, "sampler needs at least one step");
    const DitConfig& cfg = params.cfg;
    check_arg(noise.rank() == 4 && noise.dim(0) == cfg.frames && noise.dim(1) == cfg.height &&
                  noise.dim(2) == cfg.width && noise.dim(3) == cfg.channels,
              "noise must match the latent grid");

    Tensor z = noise;
    const double dt = 1.0 / double(steps);
    for (int64_t k = 0; k < steps; ++k) {
        const double t = 1.0 - double(k) * dt;
        const Tensor v1 =
            detail::velocity_at(params, z, source_latent, first_latent, t, mode, partition);
        Tensor z_half = z;
        for (int64_t i = 0; i < z.size(); ++i) z_half[i] -= 0.5 * dt * v1[i];
        const Tensor v2 = detail::velocity_at(params, z_half, source_latent, first_latent,
                                              t - 0.5 * dt, mode, partition);
        for (int64_t i = 0; i < z.size(); ++i) z[i] -= dt * v2[i];
    }
    return z;
}

}  // namespace ffpkit
