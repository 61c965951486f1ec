#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "ffpkit/common.hpp"
#include "ffpkit/rng.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

enum class EditKind { color_swap, object_remove, global_restyle };

inline const char* edit_kind_name(EditKind k) {
    switch (k) {
        case EditKind::color_swap: return "color-swap";
        case EditKind::object_remove: return "object-remove";
        case EditKind::global_restyle: return "global-restyle";
    }
    fail(ErrorCode::invalid_argument, "unknown edit kind");
}

inline EditKind edit_kind_from_index(int64_t i) {
    check_arg(i >= 0 && i <= 2, "edit kind index out of range: " + std::to_string(i));
    return static_cast<EditKind>(i);
}

enum class TrajectoryKind { linear, circular };

// Parametric trajectory of the foreground rectangle's top-left corner.
// Positions land on integer pixels, so rendered footprints are exact and the
// analytic centre doubles as evaluation ground truth.
struct MotionSpec {
    TrajectoryKind kind = TrajectoryKind::linear;
    int64_t rect_h = 2;
    int64_t rect_w = 2;
    double start_y = 0.0, start_x = 0.0;
    double vel_y = 0.0, vel_x = 0.0;
    double center_y = 0.0, center_x = 0.0;
    double radius = 0.0, omega = 0.0, phase = 0.0;

    std::pair<int64_t, int64_t> origin(int64_t frame) const {
        if (kind == TrajectoryKind::linear)
            return {llround(start_y + double(frame) * vel_y),
                    llround(start_x + double(frame) * vel_x)};
        const double a = phase + double(frame) * omega;
        return {llround(center_y + radius * std::cos(a)),
                llround(center_x + radius * std::sin(a))};
    }

    // Centre of mass of the rendered footprint at a frame.
    std::pair<double, double> center_of(int64_t frame) const {
        const auto [oy, ox] = origin(frame);
        return {double(oy) + double(rect_h - 1) / 2.0, double(ox) + double(rect_w - 1) / 2.0};
    }

private:
    static int64_t llround(double v) { return int64_t(std::llround(v)); }
};

struct SynthParams {
    int64_t frames = 4;
    int64_t height = 16;
    int64_t width = 16;

    void validate() const {
        check_arg(height >= 8 && width >= 8, "canvas must be at least 8x8");
        check_arg(frames >= 2, "need at least two frames");
    }
};

// Pixel video, values in [0,1], indexed (frame, y, x, rgb).
struct VideoClip {
    Tensor pixels;

    int64_t frames() const { return pixels.dim(0); }
    int64_t height() const { return pixels.dim(1); }
    int64_t width() const { return pixels.dim(2); }

    void validate() const {
        check_arg(pixels.rank() == 4 && pixels.dim(3) == 3,
                  "clip must be (F,H,W,3), got " + pixels.shape_str());
        for (int64_t i = 0; i < pixels.size(); ++i)
            check_arg(pixels[i] >= 0.0 && pixels[i] <= 1.0, "pixel values must lie in [0,1]");
    }
};

struct FfpSample {
    VideoClip source;
    Tensor edited_first_frame;  // (1,H,W,3), identical bits to target frame 0
    VideoClip target;
    EditKind edit_kind = EditKind::color_swap;
    MotionSpec motion;

    Tensor background;   // (1,H,W,3) static backdrop, reused by evaluation
    Tensor object_color; // (3)
    Tensor swap_color;   // (3), meaningful for color-swap
    Tensor restyle_mix;  // (3,3), identity unless global-restyle
};

// Two-sinusoid plaid in [0.1, 0.6]: textured but well separated from the
// bright foreground colors drawn in [0.65, 0.95].
inline Tensor render_background(Rng& rng, const SynthParams& p) {
    Tensor bg({1, p.height, p.width, 3});
    double fy[3], fx[3], ph[3], gy[3], gx[3], ps[3];
    for (int c = 0; c < 3; ++c) {
        fy[c] = double(rng.range(1, 3));
        fx[c] = double(rng.range(1, 3));
        ph[c] = rng.uniform(0.0, 2.0 * M_PI);
        gy[c] = double(rng.range(2, 5));
        gx[c] = double(rng.range(2, 5));
        ps[c] = rng.uniform(0.0, 2.0 * M_PI);
    }
    for (int64_t y = 0; y < p.height; ++y)
        for (int64_t x = 0; x < p.width; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                const double uy = double(y) / double(p.height);
                const double ux = double(x) / double(p.width);
                double v = 0.35 + 0.18 * std::sin(2.0 * M_PI * (fy[c] * uy + fx[c] * ux) + ph[c]) +
                           0.07 * std::sin(2.0 * M_PI * (gy[c] * uy + gx[c] * ux) + ps[c]);
                bg.at4(0, y, x, c) = std::min(1.0, std::max(0.0, v));
            }
    return bg;
}

// Static background with the rectangle painted at its per-frame position.
// Footprints are clipped at the canvas border for safety; generated motion
// specs keep them fully inside.
inline VideoClip render_clip(const Tensor& background, const MotionSpec& m, const Tensor& color,
                             int64_t frames) {
    check_arg(background.rank() == 4 && background.dim(0) == 1 && background.dim(3) == 3,
              "background must be (1,H,W,3)");
    check_arg(color.size() == 3, "color must have three channels");
    const int64_t h = background.dim(1), w = background.dim(2);
    VideoClip clip;
    clip.pixels = Tensor({frames, h, w, 3});
    for (int64_t f = 0; f < frames; ++f) {
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x)
                for (int64_t c = 0; c < 3; ++c)
                    clip.pixels.at4(f, y, x, c) = background.at4(0, y, x, c);
        const auto [oy, ox] = m.origin(f);
        for (int64_t dy = 0; dy < m.rect_h; ++dy)
            for (int64_t dx = 0; dx < m.rect_w; ++dx) {
                const int64_t y = oy + dy, x = ox + dx;
                if (y < 0 || y >= h || x < 0 || x >= w) continue;
                for (int64_t c = 0; c < 3; ++c) clip.pixels.at4(f, y, x, c) = color[c];
            }
    }
    return clip;
}

// Per-pixel channel mixing p' = clamp(M p). Generated mixing matrices are
// convex combinations of channel permutations, so the clamp never bites.
inline VideoClip apply_restyle(const VideoClip& clip, const Tensor& mix) {
    check_arg(mix.rank() == 2 && mix.dim(0) == 3 && mix.dim(1) == 3, "mix must be 3x3");
    VideoClip out;
    out.pixels = Tensor(clip.pixels.shape());
    const int64_t n = clip.pixels.size() / 3;
    for (int64_t i = 0; i < n; ++i) {
        const double* p = clip.pixels.data() + i * 3;
        double* q = out.pixels.data() + i * 3;
        for (int64_t r = 0; r < 3; ++r) {
            double v = 0.0;
            for (int64_t c = 0; c < 3; ++c) v += mix.at(r, c) * p[c];
            q[r] = std::min(1.0, std::max(0.0, v));
        }
    }
    return out;
}

namespace detail {

inline Tensor bright_color(Rng& rng) {
    Tensor c({3});
    for (int64_t i = 0; i < 3; ++i) c[i] = rng.uniform(0.65, 0.95);
    return c;
}

inline MotionSpec draw_motion(Rng& rng, const SynthParams& p) {
    MotionSpec m;
    m.rect_h = rng.range(2, std::max<int64_t>(2, p.height / 4));
    m.rect_w = rng.range(2, std::max<int64_t>(2, p.width / 4));

    const bool circular = std::min(p.height, p.width) >= 12 && rng.uniform() < 0.5;
    if (circular) {
        m.kind = TrajectoryKind::circular;
        const double max_r =
            double(std::min(p.height - m.rect_h, p.width - m.rect_w)) / 2.0 - 1.5;
        m.radius = rng.uniform(1.5, std::max(1.6, max_r));
        m.omega = (rng.uniform() < 0.5 ? 1.0 : -1.0) * 2.0 * M_PI / double(p.frames);
        m.phase = rng.uniform(0.0, 2.0 * M_PI);
        m.center_y = rng.uniform(m.radius + 1.0, double(p.height - m.rect_h) - m.radius - 1.0);
        m.center_x = rng.uniform(m.radius + 1.0, double(p.width - m.rect_w) - m.radius - 1.0);
        return m;
    }

    m.kind = TrajectoryKind::linear;
    do {
        m.vel_y = double(rng.range(-1, 1));
        m.vel_x = double(rng.range(-1, 1));
    } while (m.vel_y == 0.0 && m.vel_x == 0.0);
    const int64_t span = p.frames - 1;
    const auto pick_start = [&](int64_t extent, int64_t rect, double vel) {
        const int64_t lo = std::max<int64_t>(0, int64_t(-double(span) * vel));
        const int64_t hi = extent - rect - std::max<int64_t>(0, int64_t(double(span) * vel));
        check(hi >= lo, ErrorCode::invalid_argument, "canvas too small for trajectory");
        return double(rng.range(lo, hi));
    };
    m.start_y = pick_start(p.height, m.rect_h, m.vel_y);
    m.start_x = pick_start(p.width, m.rect_w, m.vel_x);
    return m;
}

// Convex blend of identity with a non-identity channel permutation: a hue
// rotation that keeps every output pixel inside [0,1].
inline Tensor draw_mix(Rng& rng) {
    static const int perms[5][3] = {{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    const int* perm = perms[rng.range(0, 4)];
    const double s = rng.uniform(0.3, 0.7);
    Tensor mix({3, 3});
    for (int64_t r = 0; r < 3; ++r) {
        mix.at(r, r) += 1.0 - s;
        mix.at(r, perm[r]) += s;
    }
    return mix;
}

}  // namespace detail

// Deterministic per seed: a moving rectangle over a static plaid, with one of
// three analytic first-frame edits propagated to every target frame.
inline FfpSample gen_sample(uint64_t seed, const SynthParams& params) {
    params.validate();
    Rng rng(seed);

    FfpSample s;
    s.background = render_background(rng, params);
    s.motion = detail::draw_motion(rng, params);
    s.object_color = detail::bright_color(rng);
    s.swap_color = detail::bright_color(rng);
    while (max_abs_diff(s.swap_color, s.object_color) < 0.1)
        s.swap_color = detail::bright_color(rng);
    s.edit_kind = edit_kind_from_index(rng.range(0, 2));

    s.source = render_clip(s.background, s.motion, s.object_color, params.frames);
    s.restyle_mix = Tensor({3, 3});
    for (int64_t i = 0; i < 3; ++i) s.restyle_mix.at(i, i) = 1.0;

    switch (s.edit_kind) {
        case EditKind::color_swap:
            s.target = render_clip(s.background, s.motion, s.swap_color, params.frames);
            break;
        case EditKind::object_remove: {
            s.target.pixels = Tensor({params.frames, params.height, params.width, 3});
            for (int64_t f = 0; f < params.frames; ++f)
                for (int64_t i = 0; i < s.background.size(); ++i)
                    s.target.pixels[f * s.background.size() + i] = s.background[i];
            break;
        }
        case EditKind::global_restyle:
            s.restyle_mix = detail::draw_mix(rng);
            s.target = apply_restyle(s.source, s.restyle_mix);
            break;
    }

    const int64_t per = params.height * params.width * 3;
    s.edited_first_frame = Tensor({1, params.height, params.width, 3},
                                  std::vector<double>(s.target.pixels.data(),
                                                      s.target.pixels.data() + per));
    return s;
}

}  // namespace ffpkit
