// Acceptance gate: every release criterion runs end to end and prints one
// pass/fail line. Exit status is the number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ffpkit/codec.hpp"
#include "ffpkit/conditioning.hpp"
#include "ffpkit/config.hpp"
#include "ffpkit/evaluate.hpp"
#include "ffpkit/gradcheck.hpp"
#include "ffpkit/rope.hpp"
#include "ffpkit/synth.hpp"
#include "ffpkit/taxonomy.hpp"
#include "ffpkit/train.hpp"

#include <json.hpp>

using namespace ffpkit;

namespace {

struct Criterion {
    int number;
    std::string label;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string out_path(const std::string& name) { return "acceptance_" + name; }

double scalar_loss(const std::function<ag::Id(ag::Graph&)>& build) {
    ag::Graph g(false);
    return g.value(build(g))[0];
}

// ---------------------------------------------------------------------------
// 1. Remapped rotary collapses to the standard encoding at the identity
//    coefficients (first-frame offset 0, temporal scale 1), full model.

Criterion identity_reduction() {
    Criterion c{1, "identity coefficients reproduce the standard-rotary forward"};
    const double tol = 1e-12;

    DitConfig cfg;  // release-default geometry
    cfg.validate();
    Rng rng(0xAC3E71);
    DitParams params = DitParams::init(cfg, rng);
    params.out_w.fill_normal(rng, 0.4);
    params.out_b.fill_normal(rng, 0.1);

    HeadPartition part;
    part.samples = 1;
    part.layers.assign(size_t(cfg.blocks), std::vector<HeadVote>(size_t(cfg.heads)));
    for (int64_t b = 0; b < cfg.blocks; ++b)
        for (int64_t h = 0; h < cfg.heads; ++h)
            part.layers[size_t(b)][size_t(h)].kind =
                (b + h) % 2 == 0 ? HeadKind::temporal : HeadKind::spatial;

    Tensor clean({cfg.frames, cfg.height, cfg.width, cfg.channels});
    Tensor noise(clean.shape()), source(clean.shape());
    Tensor first({1, cfg.height, cfg.width, cfg.channels});
    for (Tensor* t : {&clean, &noise, &source, &first}) t->fill_normal(rng);
    const Tensor composite =
        assemble_conditioning(interpolate_latent(clean, noise, 0.35), source, first);

    const auto forward = [&](RopeMode mode) {
        ag::Graph g(false);
        const DitNodes nodes = bind_dit(g, params, false);
        ag::Id as = -1, at = -1;
        if (mode == RopeMode::ast) {
            as = g.constant(Tensor::scalar(0.0));
            at = g.constant(Tensor::scalar(1.0));
        }
        const DitOutput fwd = dit_forward(g, nodes, cfg, composite, 0.35, mode,
                                          mode == RopeMode::ast ? &part : nullptr, as, at);
        std::vector<Tensor> out;
        out.push_back(g.value(fwd.velocity));
        for (ag::Id tap : fwd.taps) out.push_back(g.value(tap));
        return out;
    };

    const std::vector<Tensor> remapped = forward(RopeMode::ast);
    const std::vector<Tensor> standard = forward(RopeMode::baseline);
    double worst = 0.0;
    for (size_t i = 0; i < remapped.size(); ++i)
        worst = std::max(worst, max_abs_diff(remapped[i], standard[i]));

    c.pass = worst <= tol;
    c.detail = "max abs diff " + fmt_double(worst) + " (tol " + fmt_double(tol) + ")";
    return c;
}

// ---------------------------------------------------------------------------
// 2. Rotation preserves norms and dot products depend only on the relative
//    temporal position.

Criterion rotary_properties() {
    Criterion c{2, "rotations preserve norms and respect relative position"};
    const double norm_tol = 1e-12, rel_tol = 1e-9;
    Rng rng(0xAC3E72);

    const PositionGrid grid = build_position_grid(4, 4, 4);
    const RopeFrequencyConfig cfg = default_axis_split(16);
    const Tensor angles = rope_angles(grid, cfg);
    double worst_norm = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        Tensor x({grid.tokens(), cfg.head_dim()});
        x.fill_normal(rng);
        const Tensor y = rotate(x, angles);
        for (int64_t tok = 0; tok < x.dim(0); ++tok) {
            double n0 = 0.0, n1 = 0.0;
            for (int64_t d = 0; d < cfg.head_dim(); ++d) {
                n0 += x.at(tok, d) * x.at(tok, d);
                n1 += y.at(tok, d) * y.at(tok, d);
            }
            worst_norm = std::max(worst_norm, std::fabs(std::sqrt(n0) - std::sqrt(n1)));
        }
    }

    const auto dot_at = [&](const Tensor& q, const Tensor& k, double pq, double pk) {
        PositionGrid gq = build_position_grid(1, 1, 1);
        PositionGrid gk = build_position_grid(1, 1, 1);
        gq.t[0] = pq;
        gk.t[0] = pk;
        const Tensor rq = rotate(q, rope_angles(gq, cfg));
        const Tensor rk = rotate(k, rope_angles(gk, cfg));
        double s = 0.0;
        for (int64_t i = 0; i < rq.size(); ++i) s += rq[i] * rk[i];
        return s;
    };

    double worst_rel = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        Tensor q({1, cfg.head_dim()}), k({1, cfg.head_dim()});
        q.fill_normal(rng);
        k.fill_normal(rng);
        const double m = rng.uniform(0.0, 8.0);
        const double n = rng.uniform(0.0, 8.0);
        worst_rel = std::max(worst_rel, std::fabs(dot_at(q, k, m, n) - dot_at(q, k, m - n, 0.0)));
    }

    c.pass = worst_norm <= norm_tol && worst_rel <= rel_tol;
    c.detail = "norm drift " + fmt_double(worst_norm) + ", relative-position drift " +
               fmt_double(worst_rel);
    return c;
}

// ---------------------------------------------------------------------------
// 3. The head classifier agrees with an independent double-loop oracle and
//    block densities never grow as the threshold rises.

HeadKind oracle_classify(const Tensor& attn, int64_t frames, int64_t hw, double epsilon) {
    // Densities recomputed entry by entry, no shared code with the library.
    std::vector<std::vector<double>> rho(static_cast<size_t>(frames),
                                         std::vector<double>(static_cast<size_t>(frames)));
    for (int64_t i = 0; i < frames; ++i)
        for (int64_t j = 0; j < frames; ++j) {
            int64_t hits = 0;
            for (int64_t r = 0; r < hw; ++r)
                for (int64_t col = 0; col < hw; ++col)
                    if (attn.at(i * hw + r, j * hw + col) > epsilon) ++hits;
            rho[size_t(i)][size_t(j)] = double(hits) / double(hw * hw);
        }
    double max_cross = 0.0, min_diag = 1.0;
    for (int64_t i = 0; i < frames; ++i)
        for (int64_t j = 0; j < frames; ++j) {
            if (i == j)
                min_diag = std::min(min_diag, rho[size_t(i)][size_t(j)]);
            else
                max_cross = std::max(max_cross, rho[size_t(i)][size_t(j)]);
        }
    return max_cross > min_diag ? HeadKind::temporal : HeadKind::spatial;
}

Tensor random_softmax_map(Rng& rng, int64_t n) {
    Tensor attn({n, n});
    for (int64_t r = 0; r < n; ++r) {
        double mx = -1e300;
        std::vector<double> logits(static_cast<size_t>(n));
        for (int64_t col = 0; col < n; ++col) {
            logits[size_t(col)] = rng.normal() * 4.0;
            mx = std::max(mx, logits[size_t(col)]);
        }
        double z = 0.0;
        for (double v : logits) z += std::exp(v - mx);
        for (int64_t col = 0; col < n; ++col)
            attn.at(r, col) = std::exp(logits[size_t(col)] - mx) / z;
    }
    return attn;
}

Criterion classifier_oracle() {
    Criterion c{3, "head classifier equals the double-loop oracle, density monotone in epsilon"};
    Rng rng(0xAC3E73);
    int mismatches = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const int64_t frames = rng.range(2, 4);
        const int64_t hw = rng.uniform() < 0.5 ? 4 : 9;
        const Tensor attn = random_softmax_map(rng, frames * hw);
        const double eps = std::pow(10.0, rng.uniform(-8.0, -1.0));
        const Tensor rho = compute_density_grid(attn, frames, hw, eps);
        if (classify_head(rho) != oracle_classify(attn, frames, hw, eps)) ++mismatches;
    }

    int violations = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const int64_t frames = rng.range(2, 4);
        const int64_t hw = rng.uniform() < 0.5 ? 4 : 9;
        const Tensor attn = random_softmax_map(rng, frames * hw);
        double e1 = std::pow(10.0, rng.uniform(-8.0, -1.0));
        double e2 = std::pow(10.0, rng.uniform(-8.0, -1.0));
        if (e1 > e2) std::swap(e1, e2);
        const Tensor lo = compute_density_grid(attn, frames, hw, e1);
        const Tensor hi = compute_density_grid(attn, frames, hw, e2);
        for (int64_t i = 0; i < lo.size(); ++i)
            if (hi[i] > lo[i]) ++violations;
    }

    c.pass = mismatches == 0 && violations == 0;
    c.detail = std::to_string(mismatches) + " oracle mismatches, " +
               std::to_string(violations) + " monotonicity violations over 100 maps each";
    return c;
}

// ---------------------------------------------------------------------------
// 4. Both distillation losses vanish when the student tap equals the teacher.

Criterion loss_zero_cases() {
    Criterion c{4, "distillation losses vanish on identical taps"};
    const double tol = 1e-12;
    Rng rng(0xAC3E74);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const TapShape shape{rng.range(2, 4), rng.range(1, 3), rng.range(1, 3),
                             rng.range(1, 6)};
        Tensor tap({shape.tokens(), shape.channels});
        tap.fill_normal(rng);
        const double mo = scalar_loss([&](ag::Graph& g) {
            return motion_loss(g, g.input(tap), g.constant(tap), shape, 1);
        });
        const double md = scalar_loss([&](ag::Graph& g) {
            return mmd_loss(g, g.input(tap), g.constant(tap), shape);
        });
        worst = std::max({worst, std::fabs(mo), std::fabs(md)});
    }
    c.pass = worst <= tol;
    c.detail = "largest magnitude " + fmt_double(worst) + " over 50 random taps";
    return c;
}

// ---------------------------------------------------------------------------
// 5. The kernel discrepancy estimator equals an independent double-sum oracle
//    and never goes meaningfully negative.

Criterion mmd_oracle() {
    Criterion c{5, "kernel discrepancy matches the double-sum oracle"};
    const double tol = 1e-10, neg_tol = -1e-12;
    Rng rng(0xAC3E75);
    double worst = 0.0, most_negative = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const int64_t n = rng.range(1, 8), m = rng.range(1, 8), dim = rng.range(1, 6);
        Tensor p({n, dim}), q({m, dim});
        p.fill_normal(rng);
        q.fill_normal(rng);

        double value = 0.0, sigma_value = 0.0;
        {
            ag::Graph g(false);
            const ag::Id pi = g.input(p), qi = g.input(q);
            const ag::Id sigma = median_bandwidth(g, pi, qi);
            sigma_value = g.value(sigma)[0];
            value = g.value(mmd2(g, pi, qi, sigma))[0];
        }

        // Oracle: lower-median bandwidth over pooled rows, then plain sums.
        std::vector<std::vector<double>> rows;
        for (int64_t i = 0; i < n; ++i)
            rows.push_back({p.data() + i * dim, p.data() + (i + 1) * dim});
        for (int64_t i = 0; i < m; ++i)
            rows.push_back({q.data() + i * dim, q.data() + (i + 1) * dim});
        const auto sqdist = [&](const std::vector<double>& a, const std::vector<double>& b) {
            double s = 0.0;
            for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
            return s;
        };
        std::vector<double> dists;
        for (size_t i = 0; i < rows.size(); ++i)
            for (size_t j = i + 1; j < rows.size(); ++j)
                dists.push_back(std::sqrt(sqdist(rows[i], rows[j])));
        std::sort(dists.begin(), dists.end());
        const double sigma = std::max(dists[(dists.size() - 1) / 2], kBandwidthFloor);
        const auto kmean = [&](int64_t a0, int64_t an, int64_t b0, int64_t bn) {
            double s = 0.0;
            for (int64_t i = 0; i < an; ++i)
                for (int64_t j = 0; j < bn; ++j)
                    s += std::exp(-sqdist(rows[size_t(a0 + i)], rows[size_t(b0 + j)]) /
                                  (2.0 * sigma * sigma));
            return s / double(an * bn);
        };
        const double oracle = kmean(0, n, 0, n) + kmean(n, m, n, m) - 2.0 * kmean(0, n, n, m);

        worst = std::max(worst, std::fabs(value - oracle));
        worst = std::max(worst, std::fabs(sigma_value - sigma));
        most_negative = std::min(most_negative, value);
    }
    c.pass = worst <= tol && most_negative >= neg_tol;
    c.detail = "max oracle gap " + fmt_double(worst) + ", most negative value " +
               fmt_double(most_negative) + " over 1000 pairs";
    return c;
}

// ---------------------------------------------------------------------------
// 6. Analytic gradients match central finite differences for every loss and
//    through the whole 2-block width-32 model.

Criterion gradient_checks() {
    Criterion c{6, "analytic gradients match finite differences"};
    const double tol = 1e-4, h = 1e-6;
    double worst = 0.0;
    std::string worst_name;
    for (const char* comp : {"flow", "motion", "mmd", "total", "model-flow"}) {
        const GradCheckResult r = grad_check(comp, h);
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_name = std::string(comp) + " at " + r.worst;
        }
    }
    c.pass = worst < tol;
    c.detail = "max relative error " + fmt_double(worst) + " (" + worst_name + ")";
    return c;
}

// ---------------------------------------------------------------------------
// 7. The two worked loss examples reproduce exactly.

Criterion hand_oracles() {
    Criterion c{7, "worked loss examples reproduce exactly"};

    // One token per frame, one channel: student frames (1,2), teacher (1,3).
    // Cross-frame products are 2 and 3; both ordered pairs contribute |2-3|,
    // so the average over the 2 ordered pairs is exactly 1.
    const TapShape shape{2, 1, 1, 1};
    const Tensor student({2, 1}, {1.0, 2.0});
    const Tensor teacher({2, 1}, {1.0, 3.0});
    const double motion = scalar_loss([&](ag::Graph& g) {
        return motion_loss(g, g.input(student), g.constant(teacher), shape, 1);
    });

    // Static teacher (all drifts zero) against student drifts (0.1, 0.2):
    // the loss is the plain sum of absolute differences.
    const double drift_sum = scalar_loss([&](ag::Graph& g) {
        const std::vector<ag::Id> d = {g.constant(Tensor::scalar(0.1)),
                                       g.constant(Tensor::scalar(0.2))};
        return mmd_loss_from_scores(g, d, {0.0, 0.0});
    });

    c.pass = motion == 1.0 && drift_sum == 0.1 + 0.2;
    c.detail = "relational loss " + fmt_double(motion) + " (want 1), drift sum " +
               fmt_double(drift_sum) + " (want " + fmt_double(0.1 + 0.2) + ")";
    return c;
}

// ---------------------------------------------------------------------------
// 9. Baseline training smoke at release-default geometry: the flow loss must
//    fall to half of its opening moving average.

RunConfig smoke_config() {
    RunConfig cfg;
    cfg.seed = 0;
    cfg.ablation = Ablation::baseline;
    cfg.data_count = 256;
    cfg.steps = 2000;
    cfg.batch = 4;
    cfg.checkpoint_path = out_path("smoke_ckpt.ffpk");
    cfg.metrics_path = out_path("smoke_metrics.jsonl");
    cfg.partition_path = out_path("smoke_partition.json");
    return cfg;
}

double mean_l_fm(const std::vector<std::string>& lines, size_t from, size_t count) {
    double s = 0.0;
    for (size_t i = from; i < from + count; ++i)
        s += nlohmann::json::parse(lines[i]).at("l_fm").get<double>();
    return s / double(count);
}

Criterion training_smoke(TrainOutcome& smoke_out) {
    Criterion c{9, "baseline smoke halves the flow loss within 2000 steps"};
    const double budget_seconds = 900.0;
    const RunConfig cfg = smoke_config();
    smoke_out = train_run(cfg, true);

    const double early = mean_l_fm(smoke_out.metrics_lines, 0, 10);
    const double late =
        mean_l_fm(smoke_out.metrics_lines, smoke_out.metrics_lines.size() - 10, 10);
    const bool halved = late <= 0.5 * early;
    const bool in_budget = smoke_out.wall_seconds < budget_seconds;

    c.pass = halved && in_budget && std::isfinite(late);
    c.detail = "flow loss " + fmt_double(early) + " (steps 1-10) -> " + fmt_double(late) +
               " (last 10), " + fmt_double(smoke_out.wall_seconds) + "s of " +
               fmt_double(budget_seconds) + "s budget";
    return c;
}

// ---------------------------------------------------------------------------
// 8. Two identical train invocations produce bitwise-identical metrics,
//    checkpoint, and partition files.

Criterion determinism(double smoke_seconds) {
    Criterion c{8, "identical runs write bitwise-identical outputs"};
    RunConfig cfg;
    cfg.seed = 11;
    cfg.ablation = Ablation::full;
    cfg.data_count = 64;
    cfg.steps = 120;
    cfg.pretrain_steps = 60;
    cfg.batch = 4;
    cfg.checkpoint_path = out_path("det_ckpt.ffpk");
    cfg.metrics_path = out_path("det_metrics.jsonl");
    cfg.partition_path = out_path("det_partition.json");

    const double t0 = now_seconds();
    train_run(cfg, true);
    const std::string metrics1 = read_file(cfg.metrics_path);
    const std::string ckpt1 = read_file(cfg.checkpoint_path);
    const std::string part1 = read_file(cfg.partition_path);
    train_run(cfg, true);
    const double elapsed = now_seconds() - t0;
    const bool identical = metrics1 == read_file(cfg.metrics_path) &&
                           ckpt1 == read_file(cfg.checkpoint_path) &&
                           part1 == read_file(cfg.partition_path);

    const bool in_budget = elapsed <= 2.0 * smoke_seconds;
    c.pass = identical && !metrics1.empty() && !ckpt1.empty() && in_budget;
    c.detail = std::string(identical ? "metrics, checkpoint, and partition byte-equal"
                                     : "outputs differ between runs") +
               ", " + fmt_double(elapsed) + "s (budget " + fmt_double(2.0 * smoke_seconds) +
               "s)";
    return c;
}

// ---------------------------------------------------------------------------
// 10. The three-row ablation matrix trains to completion and the comparison
//     report carries all three metrics plus the directional line.

Criterion ablation_matrix(std::string& report_out) {
    Criterion c{10, "ablation matrix trains and emits the comparison report"};

    std::vector<std::string> names = {"baseline", "astrope", "full"};
    std::vector<EvalReport> reports;
    bool finite = true;

    const std::vector<FfpSample> eval_set = generate_dataset(9001, SynthParams{}, 16);

    for (const std::string& name : names) {
        RunConfig cfg;
        cfg.seed = 1;
        cfg.ablation = ablation_from(name);
        cfg.data_count = 64;
        cfg.steps = 300;
        cfg.pretrain_steps = 100;
        cfg.batch = 4;
        cfg.checkpoint_path = out_path("row_" + name + "_ckpt.ffpk");
        cfg.metrics_path = out_path("row_" + name + "_metrics.jsonl");
        cfg.partition_path = out_path("row_" + name + "_partition.json");

        const TrainOutcome out = train_run(cfg, true);
        for (const std::string& line : out.metrics_lines) {
            const nlohmann::json j = nlohmann::json::parse(line);
            for (const char* key : {"l_fm", "l_motion", "l_mmd", "total"})
                finite = finite && std::isfinite(j.at(key).get<double>());
        }

        const LoadedRun run = load_run(cfg.checkpoint_path);
        const ToyCodec codec = make_codec(run.cfg.seed, run.cfg.patch, run.cfg.channels);
        reports.push_back(evaluate_model(run.params, run.cfg.mode(),
                                         run.partition ? &*run.partition : nullptr, eval_set,
                                         codec, run.cfg.seed));
    }

    report_out = comparison_report(names, reports);
    std::ofstream(out_path("comparison_report.txt")) << report_out;

    const bool has_rows = report_out.find("baseline\t") != std::string::npos &&
                          report_out.find("astrope\t") != std::string::npos &&
                          report_out.find("full\t") != std::string::npos;
    const bool has_direction =
        report_out.find("full_vs_baseline_latent_mse: ") != std::string::npos &&
        report_out.find("full_vs_baseline_motion_err: ") != std::string::npos;
    bool report_finite = true;
    for (const EvalReport& r : reports)
        report_finite = report_finite && std::isfinite(r.latent_mse) &&
                        std::isfinite(r.first_frame_mse) && std::isfinite(r.motion_err);

    c.pass = finite && has_rows && has_direction && report_finite;
    c.detail = finite ? "all rows finite; directional comparison reported"
                      : "non-finite loss encountered";
    return c;
}

// ---------------------------------------------------------------------------
// 11. Conditioning assembly: channel count, zero padding, mask placement.

Criterion conditioning_assembly() {
    Criterion c{11, "conditioning composite is assembled exactly"};
    Rng rng(0xAC3E7B);
    int errors = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const int64_t f = rng.range(1, 5), h = rng.range(1, 6), w = rng.range(1, 6);
        const int64_t ch = rng.range(1, 8);
        Tensor noisy({f, h, w, ch}), source({f, h, w, ch}), first({1, h, w, ch});
        for (Tensor* t : {&noisy, &source, &first}) t->fill_normal(rng);
        const Tensor comp = assemble_conditioning(noisy, source, first);
        if (comp.dim(3) != 3 * ch + 1) ++errors;
        for (int64_t fi = 0; fi < f && errors == 0; ++fi)
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x) {
                    for (int64_t cc = 0; cc < ch; ++cc) {
                        if (comp.at4(fi, y, x, cc) != noisy.at4(fi, y, x, cc)) ++errors;
                        if (comp.at4(fi, y, x, ch + cc) != source.at4(fi, y, x, cc)) ++errors;
                        const double want = fi == 0 ? first.at4(0, y, x, cc) : 0.0;
                        if (comp.at4(fi, y, x, 2 * ch + cc) != want) ++errors;
                    }
                    if (comp.at4(fi, y, x, 3 * ch) != (fi == 0 ? 1.0 : 0.0)) ++errors;
                }
    }
    c.pass = errors == 0;
    c.detail = std::to_string(errors) + " placement errors over 20 random shapes";
    return c;
}

// ---------------------------------------------------------------------------
// 12. Persistence: checkpoint and manifest round-trip losslessly, and a
//     reloaded checkpoint reproduces its evaluation report bitwise.

Criterion persistence_round_trips() {
    Criterion c{12, "persistence round-trips are lossless"};

    RunConfig cfg;
    cfg.seed = 21;
    cfg.ablation = Ablation::full;
    cfg.data_count = 16;
    cfg.steps = 40;
    cfg.pretrain_steps = 20;
    cfg.batch = 4;
    cfg.probe_samples = 8;
    cfg.checkpoint_path = out_path("persist_ckpt.ffpk");
    cfg.metrics_path = out_path("persist_metrics.jsonl");
    cfg.partition_path = out_path("persist_partition.json");
    const TrainOutcome out = train_run(cfg, true);

    const LoadedRun run = load_run(cfg.checkpoint_path);
    bool params_bitwise = run.params.param_hash() == out.params.param_hash();
    run.params.visit([&](const std::string& name, const Tensor& loaded) {
        bool matched = false;
        out.params.visit([&](const std::string& name2, const Tensor& orig) {
            if (name2 == name) matched = max_abs_diff(loaded, orig) == 0.0;
        });
        params_bitwise = params_bitwise && matched;
    });

    const HeadPartition reloaded = load_partition(cfg.partition_path);
    const bool partition_lossless =
        out.partition &&
        partition_to_json(reloaded).dump() == partition_to_json(*out.partition).dump() &&
        run.partition &&
        partition_to_json(*run.partition).dump() == partition_to_json(*out.partition).dump();

    const std::vector<FfpSample> eval_set = generate_dataset(777, cfg.synth(), 8);
    const ToyCodec codec = make_codec(cfg.seed, cfg.patch, cfg.channels);
    const EvalReport before = evaluate_model(out.params, cfg.mode(),
                                             out.partition ? &*out.partition : nullptr,
                                             eval_set, codec, cfg.seed);
    const EvalReport after = evaluate_model(run.params, run.cfg.mode(),
                                            run.partition ? &*run.partition : nullptr,
                                            eval_set, codec, run.cfg.seed);
    const bool report_bitwise =
        before.text() == after.text() && before.plot_tsv() == after.plot_tsv();

    c.pass = params_bitwise && partition_lossless && report_bitwise;
    c.detail = std::string("params ") + (params_bitwise ? "bitwise" : "DIFFER") +
               ", manifest " + (partition_lossless ? "lossless" : "DIFFERS") +
               ", reloaded eval report " + (report_bitwise ? "bitwise" : "DIFFERS");
    return c;
}

}  // namespace

int main() {
    std::vector<Criterion> results;
    const auto run = [&](Criterion (*fn)()) {
        const double t0 = now_seconds();
        Criterion c = fn();
        c.seconds = now_seconds() - t0;
        results.push_back(c);
    };

    run(identity_reduction);
    run(rotary_properties);
    run(classifier_oracle);
    run(loss_zero_cases);
    run(mmd_oracle);
    run(gradient_checks);
    run(hand_oracles);
    run(conditioning_assembly);

    {
        TrainOutcome smoke_out;
        const double t0 = now_seconds();
        Criterion c9 = training_smoke(smoke_out);
        c9.seconds = now_seconds() - t0;

        const double t1 = now_seconds();
        Criterion c8 = determinism(smoke_out.wall_seconds);
        c8.seconds = now_seconds() - t1;
        results.push_back(c8);
        results.push_back(c9);
    }
    {
        std::string report;
        const double t0 = now_seconds();
        Criterion c10 = ablation_matrix(report);
        c10.seconds = now_seconds() - t0;
        results.push_back(c10);
        std::printf("--- comparison report ---\n%s-------------------------\n", report.c_str());
    }
    run(persistence_round_trips);

    std::sort(results.begin(), results.end(),
              [](const Criterion& a, const Criterion& b) { return a.number < b.number; });

    // Per-criterion runtime ceilings, seconds; 0 = unbounded here (the bound
    // is enforced inside the criterion itself or does not exist).
    const double ceilings[13] = {0, 10, 10, 30, 10, 30, 300, 0, 0, 0, 0, 5, 0};

    int failures = 0;
    for (const Criterion& c : results) {
        bool pass = c.pass;
        std::string detail = c.detail;
        if (ceilings[c.number] > 0.0 && c.seconds >= ceilings[c.number]) {
            pass = false;
            detail += " [over time ceiling]";
        }
        std::printf("%s criterion %2d: %s (%.2fs) - %s\n", pass ? "PASS" : "FAIL", c.number,
                    c.label.c_str(), c.seconds, detail.c_str());
        if (!pass) ++failures;
    }
    std::printf("acceptance: %d/12 criteria passed\n", 12 - failures);
    return failures;
}
