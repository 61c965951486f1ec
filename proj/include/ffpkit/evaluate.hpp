#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "ffpkit/codec.hpp"
#include "ffpkit/losses.hpp"
#include "ffpkit/sampler.hpp"
#include "ffpkit/synth.hpp"
#include "ffpkit/taxonomy.hpp"

namespace ffpkit {

// Shortest decimal string that round-trips the double, so identical values
// always print identically.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct SampleMetrics {
    int64_t index = 0;
    EditKind kind = EditKind::color_swap;
    double latent_mse = 0.0;
    double first_frame_mse = 0.0;
    double motion_err = 0.0;
    bool has_motion = false;  // object-remove rows carry no foreground
};

struct EvalReport {
    int64_t count = 0;
    int64_t motion_count = 0;
    double latent_mse = 0.0;
    double first_frame_mse = 0.0;
    double motion_err = 0.0;
    std::vector<SampleMetrics> rows;

    std::string text() const {
        std::string s;
        s += "samples: " + std::to_string(count) + "\n";
        s += "latent_mse: " + fmt_double(latent_mse) + "\n";
        s += "first_frame_mse: " + fmt_double(first_frame_mse) + "\n";
        s += "motion_err: " + fmt_double(motion_err) + " (over " +
             std::to_string(motion_count) + " samples with foreground)\n";
        return s;
    }

    std::string plot_tsv() const {
        std::string s = "index\tedit_kind\tlatent_mse\tfirst_frame_mse\tmotion_err\n";
        for (const SampleMetrics& r : rows) {
            s += std::to_string(r.index) + "\t" + edit_kind_name(r.kind) + "\t" +
                 fmt_double(r.latent_mse) + "\t" + fmt_double(r.first_frame_mse) + "\t" +
                 (r.has_motion ? fmt_double(r.motion_err) : std::string("na")) + "\n";
        }
        return s;
    }
};

namespace detail {

// Foreground weight = per-pixel absolute deviation from the edited clip's
// own static backdrop (restyled for global-restyle rows).
inline Tensor motion_reference(const FfpSample& s) {
    if (s.edit_kind == EditKind::global_restyle) {
        VideoClip bg;
        bg.pixels = s.background;
        return apply_restyle(bg, s.restyle_mix).pixels;
    }
    return s.background;
}

inline double centroid_deviation(const VideoClip& decoded, const FfpSample& s) {
    const Tensor ref = motion_reference(s);
    const int64_t h = decoded.height(), w = decoded.width();
    check_arg(h == s.background.dim(1) && w == s.background.dim(2),
              "decoded clip does not match the sample canvas");
    double total = 0.0;
    for (int64_t f = 0; f < decoded.frames(); ++f) {
        double wsum = 0.0, cy = 0.0, cx = 0.0;
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                double d = 0.0;
                for (int64_t c = 0; c < 3; ++c)
                    d += std::fabs(decoded.pixels.at4(f, y, x, c) - ref.at4(0, y, x, c));
                wsum += d;
                cy += d * double(y);
                cx += d * double(x);
            }
        if (wsum <= 1e-12) {
            // No foreground signal at all; score the canvas center.
            cy = double(h - 1) / 2.0;
            cx = double(w - 1) / 2.0;
        } else {
            cy /= wsum;
            cx /= wsum;
        }
        const auto [ty, tx] = s.motion.center_of(f);
        const double sy = cy - ty;
        const double sx = cx - tx;
        total += std::sqrt(sy * sy + sx * sx);
    }
    return total / double(decoded.frames());
}

}  // namespace detail

// Metrics for one generated latent against a sample's analytic ground truth.
// Latent and first-frame consistency are measured in latent space; motion is
// measured on decoded pixels against the parametric trajectory.
inline SampleMetrics eval_one(const Tensor& generated, const FfpSample& s, const ToyCodec& codec,
                              const Tensor& target_latent, const Tensor& first_latent) {
    check_arg(generated.same_shape(target_latent), "generated latent shape mismatch");
    SampleMetrics m;
    m.kind = s.edit_kind;
    m.latent_mse = mean_squared_diff(generated, target_latent);
    m.first_frame_mse = mean_squared_diff(first_frame_of(generated), first_latent);
    m.has_motion = s.edit_kind != EditKind::object_remove;
    if (m.has_motion)
        m.motion_err = detail::centroid_deviation(toy_decode(codec, generated), s);
    return m;
}

// Generates every sample with the midpoint sampler and aggregates metrics.
// Noise is drawn per sample from a stream derived only from (seed, index),
// so a fixed checkpoint and eval set reproduce the report bitwise.
inline EvalReport evaluate_model(const DitParams& params, RopeMode mode,
                                 const HeadPartition* partition,
                                 const std::vector<FfpSample>& samples, const ToyCodec& codec,
                                 uint64_t seed, int64_t sampler_steps = 20) {
    check_arg(!samples.empty(), "evaluation needs at least one sample");
    EvalReport rep;
    for (size_t i = 0; i < samples.size(); ++i) {
        const EncodedSample enc = encode_sample(codec, samples[i]);
        check(enc.source.dim(0) == params.cfg.frames &&
                  enc.source.dim(1) == params.cfg.height &&
                  enc.source.dim(2) == params.cfg.width &&
                  enc.source.dim(3) == params.cfg.channels,
              ErrorCode::config_error, "eval set does not match the checkpoint's latent grid");

        Tensor noise(enc.target.shape());
        Rng nrng = stream_for(seed, stream_tag::noise).child(0x0E7A1ULL + uint64_t(i));
        noise.fill_normal(nrng);
        const Tensor gen = sample_video(params, enc.source, enc.first, noise, mode, partition,
                                        sampler_steps);

        SampleMetrics m = eval_one(gen, samples[i], codec, enc.target, enc.first);
        m.index = int64_t(i);
        rep.rows.push_back(m);
        rep.latent_mse += m.latent_mse;
        rep.first_frame_mse += m.first_frame_mse;
        if (m.has_motion) {
            rep.motion_err += m.motion_err;
            ++rep.motion_count;
        }
    }
    rep.count = int64_t(rep.rows.size());
    rep.latent_mse /= double(rep.count);
    rep.first_frame_mse /= double(rep.count);
    if (rep.motion_count > 0) rep.motion_err /= double(rep.motion_count);
    return rep;
}

// Side-by-side table for the ablation matrix plus the directional comparison
// of the full row against the baseline (reported, not gated).
inline std::string comparison_report(const std::vector<std::string>& names,
                                     const std::vector<EvalReport>& reports) {
    check_arg(names.size() == reports.size() && !names.empty(),
              "need one name per report");
    std::string s = "row\tlatent_mse\tfirst_frame_mse\tmotion_err\n";
    for (size_t i = 0; i < names.size(); ++i) {
        const EvalReport& r = reports[i];
        s += names[i] + "\t" + fmt_double(r.latent_mse) + "\t" +
             fmt_double(r.first_frame_mse) + "\t" + fmt_double(r.motion_err) + "\n";
    }
    const EvalReport* base = nullptr;
    const EvalReport* full = nullptr;
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i] == "baseline") base = &reports[i];
        if (names[i] == "full") full = &reports[i];
    }
    if (base != nullptr && full != nullptr) {
        s += "full_vs_baseline_latent_mse: ";
        s += full->latent_mse < base->latent_mse ? "better" : "not_better";
        s += "\nfull_vs_baseline_motion_err: ";
        s += full->motion_err < base->motion_err ? "better" : "not_better";
        s += "\n";
    }
    return s;
}

}  // namespace ffpkit
