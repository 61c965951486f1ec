#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ffpkit/autograd.hpp"
#include "ffpkit/common.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

enum class HeadKind { spatial, temporal };

inline const char* head_kind_name(HeadKind k) {
    return k == HeadKind::spatial ? "spatial" : "temporal";
}

// Per-token (t, h, w) coordinates in frame-major token order:
// token = f*H*W + h*W + w. Coordinates are real-valued so remapped
// grids reuse the same representation.
struct PositionGrid {
    int64_t frames = 0;
    int64_t height = 0;
    int64_t width = 0;
    std::vector<double> t, h, w;

    int64_t tokens() const { return frames * height * width; }
};

inline PositionGrid build_position_grid(int64_t frames, int64_t height, int64_t width) {
    check_arg(frames >= 1 && height >= 1 && width >= 1, "position grid dims must be >= 1");
    PositionGrid g;
    g.frames = frames;
    g.height = height;
    g.width = width;
    const int64_t n = frames * height * width;
    g.t.reserve(size_t(n));
    g.h.reserve(size_t(n));
    g.w.reserve(size_t(n));
    for (int64_t f = 0; f < frames; ++f)
        for (int64_t y = 0; y < height; ++y)
            for (int64_t x = 0; x < width; ++x) {
                g.t.push_back(double(f));
                g.h.push_back(double(y));
                g.w.push_back(double(x));
            }
    return g;
}

// Rotary dimensions assigned to each position axis. Every token feature
// pair (2i, 2i+1) belongs to exactly one axis; columns are laid out
// [t pairs | h pairs | w pairs].
struct RopeFrequencyConfig {
    int64_t dim_t = 0;
    int64_t dim_h = 0;
    int64_t dim_w = 0;
    double base = 10000.0;

    int64_t head_dim() const { return dim_t + dim_h + dim_w; }
    int64_t pairs() const { return head_dim() / 2; }

    void validate() const {
        check_arg(dim_t > 0 && dim_h > 0 && dim_w > 0, "rope axis dims must be positive");
        check_arg(dim_t % 2 == 0 && dim_h % 2 == 0 && dim_w % 2 == 0,
                  "rope axis dims must be even");
        check_arg(base > 1.0, "rope base must exceed 1");
    }
};

// Splits head_dim across (t, h, w): both spatial axes get 2*floor(head_dim/6)
// dims, the temporal axis takes the rest.
inline RopeFrequencyConfig default_axis_split(int64_t head_dim, double base = 10000.0) {
    check_arg(head_dim >= 6, "head_dim must be at least 6 to cover three axes");
    check_arg(head_dim % 2 == 0, "head_dim must be even");
    RopeFrequencyConfig cfg;
    cfg.dim_h = 2 * (head_dim / 6);
    cfg.dim_w = cfg.dim_h;
    cfg.dim_t = head_dim - cfg.dim_h - cfg.dim_w;
    cfg.base = base;
    cfg.validate();
    return cfg;
}

// Scale coefficients for the two remaps. alpha_s shifts the first frame's
// temporal index, alpha_t rescales the whole temporal axis. Zero is legal
// (it reproduces the unmapped geometry for the first frame).
struct RopeCoefficients {
    double alpha_s = 1.0;
    double alpha_t = 1.0;

    void validate() const {
        check_arg(std::isfinite(alpha_s) && std::isfinite(alpha_t),
                  "rope coefficients must be finite");
        check_arg(alpha_s >= 0.0 && alpha_t >= 0.0, "rope coefficients must be non-negative");
    }
};

// First frame's temporal index moves to alpha_s * frames; every other
// coordinate is untouched.
inline PositionGrid remap_spatial_positions(PositionGrid g, double alpha_s) {
    check_arg(std::isfinite(alpha_s) && alpha_s >= 0.0, "alpha_s must be finite and >= 0");
    const double moved = alpha_s * double(g.frames);
    for (size_t i = 0; i < g.t.size(); ++i)
        if (g.t[i] == 0.0) g.t[i] = moved;
    return g;
}

// Uniformly rescales temporal indices to [0, alpha_t, 2*alpha_t, ...].
inline PositionGrid remap_temporal_positions(PositionGrid g, double alpha_t) {
    check_arg(std::isfinite(alpha_t) && alpha_t >= 0.0, "alpha_t must be finite and >= 0");
    for (double& v : g.t) v *= alpha_t;
    return g;
}

// Frequency of pair i within an axis of axis_dim rotary dims.
inline double axis_frequency(double base, int64_t pair_index, int64_t axis_dim) {
    return std::pow(base, -2.0 * double(pair_index) / double(axis_dim));
}

// (tokens, pairs) angle table for the grid as-is.
inline Tensor rope_angles(const PositionGrid& grid, const RopeFrequencyConfig& cfg) {
    cfg.validate();
    const int64_t n = grid.tokens();
    check_arg(int64_t(grid.t.size()) == n, "position grid is inconsistent");
    Tensor angles({n, cfg.pairs()});
    for (int64_t tok = 0; tok < n; ++tok) {
        int64_t col = 0;
        for (int64_t i = 0; i < cfg.dim_t / 2; ++i)
            angles.at(tok, col++) = grid.t[size_t(tok)] * axis_frequency(cfg.base, i, cfg.dim_t);
        for (int64_t i = 0; i < cfg.dim_h / 2; ++i)
            angles.at(tok, col++) = grid.h[size_t(tok)] * axis_frequency(cfg.base, i, cfg.dim_h);
        for (int64_t i = 0; i < cfg.dim_w / 2; ++i)
            angles.at(tok, col++) = grid.w[size_t(tok)] * axis_frequency(cfg.base, i, cfg.dim_w);
    }
    return angles;
}

// Plain rotation of adjacent feature pairs by the given angle table.
inline Tensor rotate(const Tensor& x, const Tensor& angles) {
    check_arg(x.rank() == 2 && angles.rank() == 2, "rotate expects rank-2 inputs");
    check_arg(x.dim(0) == angles.dim(0) && x.dim(1) == 2 * angles.dim(1),
              "rotate shape mismatch: tokens " + x.shape_str());
    Tensor out({x.dim(0), x.dim(1)});
    for (int64_t tok = 0; tok < x.dim(0); ++tok)
        for (int64_t p = 0; p < angles.dim(1); ++p) {
            const double c = std::cos(angles.at(tok, p));
            const double s = std::sin(angles.at(tok, p));
            const double x0 = x.at(tok, 2 * p), x1 = x.at(tok, 2 * p + 1);
            out.at(tok, 2 * p) = x0 * c - x1 * s;
            out.at(tok, 2 * p + 1) = x0 * s + x1 * c;
        }
    return out;
}

struct RopeAngleTables {
    Tensor base;
    Tensor slope;
};

// Decomposes the head-kind remap into theta = base + alpha * slope, exact
// for every alpha, so one rotation op serves the whole coefficient range
// and carries gradients into alpha.
//   spatial:  frame-0 tokens swap their temporal index for alpha * frames
//   temporal: every temporal index is scaled by alpha
inline RopeAngleTables ast_angle_tables(const PositionGrid& grid, const RopeFrequencyConfig& cfg,
                                        HeadKind kind) {
    cfg.validate();
    const int64_t n = grid.tokens();
    check_arg(int64_t(grid.t.size()) == n, "position grid is inconsistent");
    RopeAngleTables tabs{Tensor({n, cfg.pairs()}), Tensor({n, cfg.pairs()})};
    for (int64_t tok = 0; tok < n; ++tok) {
        int64_t col = 0;
        const double t = grid.t[size_t(tok)];
        for (int64_t i = 0; i < cfg.dim_t / 2; ++i, ++col) {
            const double freq = axis_frequency(cfg.base, i, cfg.dim_t);
            if (kind == HeadKind::temporal) {
                tabs.slope.at(tok, col) = t * freq;
            } else if (t == 0.0) {
                tabs.slope.at(tok, col) = double(grid.frames) * freq;
            } else {
                tabs.base.at(tok, col) = t * freq;
            }
        }
        for (int64_t i = 0; i < cfg.dim_h / 2; ++i, ++col)
            tabs.base.at(tok, col) = grid.h[size_t(tok)] * axis_frequency(cfg.base, i, cfg.dim_h);
        for (int64_t i = 0; i < cfg.dim_w / 2; ++i, ++col)
            tabs.base.at(tok, col) = grid.w[size_t(tok)] * axis_frequency(cfg.base, i, cfg.dim_w);
    }
    return tabs;
}

// Graph-side rotation with the head-kind remap. alpha is the scalar node
// holding alpha_s (spatial heads) or alpha_t (temporal heads); pass a
// negative id to apply the unmapped geometry.
inline ag::Id ast_rotate(ag::Graph& g, ag::Id x, const PositionGrid& grid,
                         const RopeFrequencyConfig& cfg, HeadKind kind, ag::Id alpha) {
    if (alpha < 0) {
        Tensor base = rope_angles(grid, cfg);
        Tensor slope(base.shape());
        return g.rotate_pairs(x, -1, base, slope);
    }
    RopeAngleTables tabs = ast_angle_tables(grid, cfg, kind);
    return g.rotate_pairs(x, alpha, tabs.base, tabs.slope);
}

}  // namespace ffpkit
