#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ffpkit/checkpoint.hpp"
#include "ffpkit/codec.hpp"
#include "ffpkit/config.hpp"
#include "ffpkit/dataset.hpp"
#include "ffpkit/dit.hpp"
#include "ffpkit/evaluate.hpp"
#include "ffpkit/losses.hpp"
#include "ffpkit/optim.hpp"
#include "ffpkit/synth.hpp"
#include "ffpkit/taxonomy.hpp"

namespace ffpkit {

// Seed for sample i of a run: mixes the run seed with the index through
// splitmix so neighboring indices get unrelated generators.
inline uint64_t sample_seed(uint64_t run_seed, int64_t index) {
    uint64_t sm = run_seed ^ (0xDA7A5E7ULL + 0x9E3779B97F4A7C15ULL * uint64_t(index + 1));
    return splitmix64(sm);
}

inline std::vector<FfpSample> generate_dataset(uint64_t seed, const SynthParams& sp,
                                               int64_t count) {
    check_arg(count >= 1, "dataset needs at least one sample");
    std::vector<FfpSample> out;
    out.reserve(size_t(count));
    for (int64_t i = 0; i < count; ++i) out.push_back(gen_sample(sample_seed(seed, i), sp));
    return out;
}

struct TrainOutcome {
    RunConfig cfg;
    DitParams params;
    std::optional<HeadPartition> partition;
    std::vector<std::string> metrics_lines;  // exact bytes written, minus '\n'
    LossReport first_report, last_report;
    double wall_seconds = 0.0;
};

namespace detail {

struct StepStats {
    double l_fm = 0.0, l_motion = 0.0, l_mmd = 0.0, total = 0.0;
    double alpha_s = 0.0, alpha_t = 0.0;
};

// One optimizer step over a batch: per-item graphs, gradients accumulated in
// canonical parameter order, then averaged. Throws a numeric error naming
// the offending component if any loss is non-finite.
inline StepStats train_step(DitParams& params, AdamW& opt,
                            const std::vector<EncodedSample>& data,
                            const std::vector<int64_t>& batch_idx, Rng& t_rng, Rng& noise_rng,
                            RopeMode mode, const HeadPartition* partition,
                            const LossWeights& weights, int64_t k_s) {
    const DitConfig& cfg = params.cfg;
    const TapShape tap_shape{cfg.frames, cfg.height, cfg.width, cfg.dim};
    const bool distill = weights.lambda_motion > 0.0 || weights.lambda_mmd > 0.0;
    const int64_t batch = int64_t(batch_idx.size());

    std::vector<Tensor*> plist = parameter_list(params);
    std::vector<Tensor> grads;
    grads.reserve(plist.size());
    for (Tensor* p : plist) grads.emplace_back(p->shape());

    StepStats stats;
    for (int64_t item = 0; item < batch; ++item) {
        const EncodedSample& s = data[size_t(batch_idx[size_t(item)])];
        const double t = t_rng.uniform_open();
        Tensor noise(s.target.shape());
        noise.fill_normal(noise_rng);

        TeacherTaps teacher;
        if (distill) teacher = teacher_forward(params, s.target, noise, t, mode, partition);

        ag::Graph g(true);
        const DitNodes nodes = bind_dit(g, params, true);
        ag::Id alpha_s = -1, alpha_t = -1;
        if (mode == RopeMode::ast) {
            const ag::Id z_src =
                g.constant(s.source.reshaped({cfg.tokens(), cfg.channels}));
            const PredictedCoefficients pc = predict_coefficients(g, z_src, nodes.coef);
            alpha_s = pc.alpha_s;
            alpha_t = pc.alpha_t;
            stats.alpha_s += pc.values.alpha_s;
            stats.alpha_t += pc.values.alpha_t;
        } else {
            stats.alpha_s += 1.0;
            stats.alpha_t += 1.0;
        }

        const Tensor composite =
            assemble_conditioning(interpolate_latent(s.target, noise, t), s.source, s.first);
        const DitOutput fwd =
            dit_forward(g, nodes, cfg, composite, t, mode, partition, alpha_s, alpha_t);

        const ag::Id l_fm =
            flow_match_loss(g, fwd.velocity, s.target.reshaped({cfg.tokens(), cfg.channels}),
                            noise.reshaped({cfg.tokens(), cfg.channels}));
        ag::Id l_motion = -1, l_mmd = -1;
        if (distill) {
            // Multiple taps average their losses.
            ag::Id mo = -1, md = -1;
            for (size_t k = 0; k < fwd.taps.size(); ++k) {
                const ag::Id teach = g.constant(teacher.taps[k]);
                const ag::Id mo_k = motion_loss(g, fwd.taps[k], teach, tap_shape, k_s);
                const ag::Id md_k = mmd_loss(g, fwd.taps[k], teach, tap_shape);
                mo = mo < 0 ? mo_k : g.add(mo, mo_k);
                md = md < 0 ? md_k : g.add(md, md_k);
            }
            l_motion = g.scale(mo, 1.0 / double(fwd.taps.size()));
            l_mmd = g.scale(md, 1.0 / double(fwd.taps.size()));
        }

        const TotalLoss total = total_loss(g, l_fm, l_motion, l_mmd, weights);
        g.backward(total.node);

        size_t k = 0;
        nodes.visit([&](const std::string&, const ag::Id& id) {
            if (g.needs(id)) {
                const Tensor& gt = g.grad_or_zeros(id);
                Tensor& acc = grads[k];
                for (int64_t i = 0; i < acc.size(); ++i) acc[i] += gt[i];
            }
            ++k;
        });

        stats.l_fm += total.report.l_fm;
        stats.l_motion += total.report.l_motion;
        stats.l_mmd += total.report.l_mmd;
        stats.total += total.report.total;
    }

    const double inv = 1.0 / double(batch);
    for (Tensor& gacc : grads)
        for (int64_t i = 0; i < gacc.size(); ++i) gacc[i] *= inv;
    opt.step(plist, grads);

    stats.l_fm *= inv;
    stats.l_motion *= inv;
    stats.l_mmd *= inv;
    stats.total *= inv;
    stats.alpha_s *= inv;
    stats.alpha_t *= inv;
    return stats;
}

inline std::string metrics_line(int64_t step, const StepStats& s) {
    return "{\"schema\":1,\"step\":" + std::to_string(step) + ",\"l_fm\":" + fmt_double(s.l_fm) +
           ",\"l_motion\":" + fmt_double(s.l_motion) + ",\"l_mmd\":" + fmt_double(s.l_mmd) +
           ",\"total\":" + fmt_double(s.total) + ",\"alpha_s\":" + fmt_double(s.alpha_s) +
           ",\"alpha_t\":" + fmt_double(s.alpha_t) + "}";
}

// Probe composites reuse the student conditioning at t = 0.5.
inline Tensor probe_composite(const EncodedSample& s, Rng probe_rng) {
    Tensor noise(s.target.shape());
    noise.fill_normal(probe_rng);
    return assemble_conditioning(interpolate_latent(s.target, noise, 0.5), s.source, s.first);
}

}  // namespace detail

// Classifies every head of the given parameters by probing attention under
// baseline rotary at t = 0.5 on the first `samples` dataset entries.
inline HeadPartition classify_heads(const DitParams& params,
                                    const std::vector<EncodedSample>& data, int64_t samples,
                                    double epsilon, uint64_t seed) {
    check_arg(samples >= 1 && samples <= int64_t(data.size()),
              "probe sample count must lie in [1, dataset size]");
    const DitConfig& cfg = params.cfg;
    const Rng probe_root = stream_for(seed, stream_tag::probe);
    const auto probe = [&](int64_t i) {
        return probe_attention_maps(
            params, detail::probe_composite(data[size_t(i)], probe_root.child(uint64_t(i))),
            0.5);
    };
    return classify_model(probe, cfg.blocks, cfg.heads, cfg.frames, cfg.tokens_per_frame(),
                          samples, epsilon, params.param_hash());
}

// Full deterministic run: dataset synthesis, optional partition bootstrap
// (brief standard-rotary pretrain, classify, freeze), the main loop, and
// persistence. write_outputs=false runs everything in memory.
inline TrainOutcome train_run(const RunConfig& cfg, bool write_outputs = true) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    const ToyCodec codec = make_codec(cfg.seed, cfg.patch, cfg.channels);
    const std::vector<FfpSample> raw = generate_dataset(cfg.seed, cfg.synth(), cfg.data_count);
    std::vector<EncodedSample> data;
    data.reserve(raw.size());
    for (const FfpSample& s : raw) data.push_back(encode_sample(codec, s));

    TrainOutcome out;
    out.cfg = cfg;
    Rng params_rng = stream_for(cfg.seed, stream_tag::params);
    out.params = DitParams::init(cfg.dit(), params_rng);

    const RopeMode mode = cfg.mode();
    const LossWeights weights = cfg.weights();

    HeadPartition partition;
    if (mode == RopeMode::ast) {
        // Bootstrap: the classifier needs specialized heads, so probe a
        // briefly pretrained throwaway copy; the main run restarts from the
        // shared init so every ablation row trains the same step count.
        DitParams pre = out.params;
        AdamW pre_opt(AdamWConfig{cfg.step_size, cfg.beta1, cfg.beta2, cfg.adam_eps,
                                  cfg.weight_decay});
        Rng pre_batch = stream_for(cfg.seed, stream_tag::data).child(1);
        Rng pre_t = stream_for(cfg.seed, stream_tag::timestep).child(1);
        Rng pre_noise = stream_for(cfg.seed, stream_tag::noise).child(1);
        for (int64_t step = 1; step <= cfg.pretrain_steps; ++step) {
            std::vector<int64_t> idx(size_t(cfg.batch));
            for (int64_t& v : idx) v = int64_t(pre_batch.next_below(uint64_t(raw.size())));
            detail::train_step(pre, pre_opt, data, idx, pre_t, pre_noise, RopeMode::baseline,
                               nullptr, LossWeights{0.0, 0.0}, cfg.k_s);
        }
        partition = classify_heads(pre, data, cfg.probe_samples, cfg.epsilon, cfg.seed);
        out.partition = partition;
        if (write_outputs) save_partition(partition, cfg.partition_path);
    }
    const HeadPartition* part_ptr = out.partition ? &partition : nullptr;

    std::ofstream metrics;
    std::ofstream wall;
    if (write_outputs) {
        metrics.open(cfg.metrics_path, std::ios::trunc);
        check(bool(metrics), ErrorCode::io_error, "cannot open " + cfg.metrics_path);
        // Wall-clock timing is environment-dependent, so it rides in a
        // sidecar; the metrics stream itself is bitwise reproducible.
        wall.open(cfg.metrics_path + ".wall", std::ios::trunc);
        check(bool(wall), ErrorCode::io_error, "cannot open " + cfg.metrics_path + ".wall");
    }

    AdamW opt(AdamWConfig{cfg.step_size, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
    Rng batch_rng = stream_for(cfg.seed, stream_tag::data).child(2);
    Rng t_rng = stream_for(cfg.seed, stream_tag::timestep).child(2);
    Rng noise_rng = stream_for(cfg.seed, stream_tag::noise).child(2);

    for (int64_t step = 1; step <= cfg.steps; ++step) {
        std::vector<int64_t> idx(size_t(cfg.batch));
        for (int64_t& v : idx) v = int64_t(batch_rng.next_below(uint64_t(raw.size())));

        detail::StepStats stats;
        try {
            stats = detail::train_step(out.params, opt, data, idx, t_rng, noise_rng, mode,
                                       part_ptr, weights, cfg.k_s);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::numeric_error)
                fail(ErrorCode::numeric_error,
                     "step " + std::to_string(step) + ": " + e.what());
            throw;
        }

        const std::string line = detail::metrics_line(step, stats);
        out.metrics_lines.push_back(line);
        if (write_outputs) {
            metrics << line << "\n";
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                    .count();
            wall << step << "\t" << fmt_double(elapsed) << "\n";
        }

        LossReport rep;
        rep.l_fm = stats.l_fm;
        rep.l_motion = stats.l_motion;
        rep.l_mmd = stats.l_mmd;
        rep.total = stats.total;
        rep.weights = weights;
        if (step == 1) out.first_report = rep;
        out.last_report = rep;
    }

    if (write_outputs) {
        metrics.flush();
        check(bool(metrics), ErrorCode::io_error, "metrics write failed");
        save_checkpoint(cfg.checkpoint_path, config_to_json(cfg).dump(), out.params, part_ptr);
    }
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

// Rebuilds a run's model from its checkpoint file.
struct LoadedRun {
    RunConfig cfg;
    DitParams params;
    std::optional<HeadPartition> partition;
};

inline LoadedRun load_run(const std::string& checkpoint_path) {
    const Checkpoint ck = load_checkpoint_file(checkpoint_path);
    LoadedRun run;
    run.cfg = config_from_json(nlohmann::json::parse(ck.config_json));
    Rng dummy(0);
    run.params = DitParams::init(run.cfg.dit(), dummy);
    fill_params_from(ck, run.params);
    run.partition = ck.partition;
    return run;
}

}  // namespace ffpkit
