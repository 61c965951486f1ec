#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "ffpkit/autograd.hpp"
#include "ffpkit/common.hpp"
#include "ffpkit/conditioning.hpp"
#include "ffpkit/predictor.hpp"
#include "ffpkit/rng.hpp"
#include "ffpkit/rope.hpp"
#include "ffpkit/taxonomy.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

struct DitConfig {
    int64_t blocks = 2;
    int64_t dim = 64;
    int64_t heads = 4;
    int64_t frames = 4;
    int64_t height = 8;
    int64_t width = 8;
    int64_t channels = 4;
    int64_t predictor_hidden = kPredictorHidden;
    double rope_base = 10000.0;
    std::vector<int64_t> tap_blocks;

    int64_t head_dim() const { return dim / heads; }
    int64_t tokens() const { return frames * height * width; }
    int64_t tokens_per_frame() const { return height * width; }
    int64_t cond_channels() const { return 3 * channels + 1; }
    int64_t mlp_dim() const { return 2 * dim; }

    RopeFrequencyConfig rope() const { return default_axis_split(head_dim(), rope_base); }

    std::vector<int64_t> taps_or_default() const {
        if (!tap_blocks.empty()) return tap_blocks;
        return {blocks / 2};
    }

    void validate() const {
        check_arg(blocks >= 1, "need at least one block");
        check_arg(heads >= 1 && dim % heads == 0, "model width must be divisible by heads");
        check_arg(dim % 2 == 0, "model width must be even");
        check_arg(head_dim() >= 6 && head_dim() % 2 == 0,
                  "head_dim must be an even value of at least 6");
        check_arg(frames >= 1 && height >= 1 && width >= 1 && channels >= 1,
                  "latent dims must be positive");
        check_arg(predictor_hidden >= 1, "predictor hidden width must be positive");
        for (int64_t b : taps_or_default())
            check_arg(b >= 0 && b < blocks, "tap block index out of range");
    }
};

struct DitBlockParams {
    Tensor norm_attn;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor norm_mlp;
    Tensor w1, b1, w2, b2;
};

struct DitParams {
    DitConfig cfg;
    Tensor in_w, in_b;
    Tensor time_w, time_b;
    std::vector<DitBlockParams> blocks;
    Tensor norm_out, out_w, out_b;
    CoefficientPredictorParams coef;

    // The unpatch projection starts at zero, so the initial velocity field
    // is identically zero for every input.
    static DitParams init(const DitConfig& cfg, Rng& rng) {
        cfg.validate();
        DitParams p;
        p.cfg = cfg;
        p.in_w = Tensor({cfg.cond_channels(), cfg.dim});
        p.in_w.fill_normal(rng, 1.0 / std::sqrt(double(cfg.cond_channels())));
        p.in_b = Tensor({1, cfg.dim});
        p.time_w = Tensor({cfg.dim, cfg.dim});
        p.time_w.fill_normal(rng, 1.0 / std::sqrt(double(cfg.dim)));
        p.time_b = Tensor({1, cfg.dim});
        const double ws = 1.0 / std::sqrt(double(cfg.dim));
        for (int64_t b = 0; b < cfg.blocks; ++b) {
            DitBlockParams blk;
            blk.norm_attn = Tensor::full({1, cfg.dim}, 1.0);
            for (Tensor* w : {&blk.wq, &blk.wk, &blk.wv, &blk.wo}) {
                *w = Tensor({cfg.dim, cfg.dim});
                w->fill_normal(rng, ws);
            }
            blk.bq = Tensor({1, cfg.dim});
            blk.bk = Tensor({1, cfg.dim});
            blk.bv = Tensor({1, cfg.dim});
            blk.bo = Tensor({1, cfg.dim});
            blk.norm_mlp = Tensor::full({1, cfg.dim}, 1.0);
            blk.w1 = Tensor({cfg.dim, cfg.mlp_dim()});
            blk.w1.fill_normal(rng, ws);
            blk.b1 = Tensor({1, cfg.mlp_dim()});
            blk.w2 = Tensor({cfg.mlp_dim(), cfg.dim});
            blk.w2.fill_normal(rng, 1.0 / std::sqrt(double(cfg.mlp_dim())));
            blk.b2 = Tensor({1, cfg.dim});
            p.blocks.push_back(std::move(blk));
        }
        p.norm_out = Tensor::full({1, cfg.dim}, 1.0);
        p.out_w = Tensor({cfg.dim, cfg.channels});
        p.out_b = Tensor({1, cfg.channels});
        p.coef = CoefficientPredictorParams::init(cfg.channels, rng, cfg.predictor_hidden);
        return p;
    }

    template <typename Self, typename F>
    static void visit_impl(Self& self, F&& f) {
        f("in.w", self.in_w);
        f("in.b", self.in_b);
        f("time.w", self.time_w);
        f("time.b", self.time_b);
        for (size_t b = 0; b < self.blocks.size(); ++b) {
            const std::string pre = "blk" + std::to_string(b) + ".";
            auto& blk = self.blocks[b];
            f(pre + "norm_attn", blk.norm_attn);
            f(pre + "wq", blk.wq);
            f(pre + "bq", blk.bq);
            f(pre + "wk", blk.wk);
            f(pre + "bk", blk.bk);
            f(pre + "wv", blk.wv);
            f(pre + "bv", blk.bv);
            f(pre + "wo", blk.wo);
            f(pre + "bo", blk.bo);
            f(pre + "norm_mlp", blk.norm_mlp);
            f(pre + "w1", blk.w1);
            f(pre + "b1", blk.b1);
            f(pre + "w2", blk.w2);
            f(pre + "b2", blk.b2);
        }
        f("out.norm", self.norm_out);
        f("out.w", self.out_w);
        f("out.b", self.out_b);
        f("coef.w1", self.coef.w1);
        f("coef.b1", self.coef.b1);
        f("coef.w2", self.coef.w2);
        f("coef.b2", self.coef.b2);
    }

    template <typename F>
    void visit(F&& f) {
        visit_impl(*this, f);
    }

    template <typename F>
    void visit(F&& f) const {
        visit_impl(*this, f);
    }

    // Fingerprint of names, shapes and payloads in canonical order.
    uint64_t param_hash() const {
        Fnv1a h;
        visit([&](const std::string& name, const Tensor& t) {
            h.update(name.data(), name.size());
            const int64_t r = t.rank();
            h.update(&r, sizeof(r));
            for (int i = 0; i < r; ++i) {
                const int64_t d = t.dim(i);
                h.update(&d, sizeof(d));
            }
            h.update(t.data(), size_t(t.size()) * sizeof(double));
        });
        return h.digest();
    }
};

struct DitBlockNodes {
    ag::Id norm_attn = -1;
    ag::Id wq = -1, bq = -1, wk = -1, bk = -1, wv = -1, bv = -1, wo = -1, bo = -1;
    ag::Id norm_mlp = -1;
    ag::Id w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

struct DitNodes {
    ag::Id in_w = -1, in_b = -1, time_w = -1, time_b = -1;
    std::vector<DitBlockNodes> blocks;
    ag::Id norm_out = -1, out_w = -1, out_b = -1;
    CoefficientPredictorNodes coef;

    // Must mirror DitParams::visit order exactly (kept honest by tests).
    template <typename Self, typename F>
    static void visit_impl(Self& self, F&& f) {
        f("in.w", self.in_w);
        f("in.b", self.in_b);
        f("time.w", self.time_w);
        f("time.b", self.time_b);
        for (size_t b = 0; b < self.blocks.size(); ++b) {
            const std::string pre = "blk" + std::to_string(b) + ".";
            auto& blk = self.blocks[b];
            f(pre + "norm_attn", blk.norm_attn);
            f(pre + "wq", blk.wq);
            f(pre + "bq", blk.bq);
            f(pre + "wk", blk.wk);
            f(pre + "bk", blk.bk);
            f(pre + "wv", blk.wv);
            f(pre + "bv", blk.bv);
            f(pre + "wo", blk.wo);
            f(pre + "bo", blk.bo);
            f(pre + "norm_mlp", blk.norm_mlp);
            f(pre + "w1", blk.w1);
            f(pre + "b1", blk.b1);
            f(pre + "w2", blk.w2);
            f(pre + "b2", blk.b2);
        }
        f("out.norm", self.norm_out);
        f("out.w", self.out_w);
        f("out.b", self.out_b);
        f("coef.w1", self.coef.w1);
        f("coef.b1", self.coef.b1);
        f("coef.w2", self.coef.w2);
        f("coef.b2", self.coef.b2);
    }

    template <typename F>
    void visit(F&& f) const {
        visit_impl(*this, f);
    }

    template <typename F>
    void visit(F&& f) {
        visit_impl(*this, f);
    }
};

inline DitNodes bind_dit(ag::Graph& g, const DitParams& p, bool requires_grad) {
    DitNodes n;
    n.in_w = g.input(p.in_w, requires_grad);
    n.in_b = g.input(p.in_b, requires_grad);
    n.time_w = g.input(p.time_w, requires_grad);
    n.time_b = g.input(p.time_b, requires_grad);
    for (const DitBlockParams& blk : p.blocks) {
        DitBlockNodes bn;
        bn.norm_attn = g.input(blk.norm_attn, requires_grad);
        bn.wq = g.input(blk.wq, requires_grad);
        bn.bq = g.input(blk.bq, requires_grad);
        bn.wk = g.input(blk.wk, requires_grad);
        bn.bk = g.input(blk.bk, requires_grad);
        bn.wv = g.input(blk.wv, requires_grad);
        bn.bv = g.input(blk.bv, requires_grad);
        bn.wo = g.input(blk.wo, requires_grad);
        bn.bo = g.input(blk.bo, requires_grad);
        bn.norm_mlp = g.input(blk.norm_mlp, requires_grad);
        bn.w1 = g.input(blk.w1, requires_grad);
        bn.b1 = g.input(blk.b1, requires_grad);
        bn.w2 = g.input(blk.w2, requires_grad);
        bn.b2 = g.input(blk.b2, requires_grad);
        n.blocks.push_back(bn);
    }
    n.norm_out = g.input(p.norm_out, requires_grad);
    n.out_w = g.input(p.out_w, requires_grad);
    n.out_b = g.input(p.out_b, requires_grad);
    n.coef = bind_predictor(g, p.coef, requires_grad);
    return n;
}

// [sin(t*w_i) | cos(t*w_i)] with w_i = 10000^(-i/half).
inline Tensor sinusoidal_embedding(double t, int64_t dim) {
    check_arg(dim >= 2 && dim % 2 == 0, "embedding dim must be even and >= 2");
    check_arg(std::isfinite(t), "timestep must be finite");
    Tensor e({1, dim});
    const int64_t half = dim / 2;
    for (int64_t i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -double(i) / double(half));
        e[i] = std::sin(t * freq);
        e[half + i] = std::cos(t * freq);
    }
    return e;
}

enum class RopeMode { baseline, ast };

// Multi-head scaled-dot-product attention over pre-normalized tokens.
// Query/key vectors are rotated per head: baseline mode applies the raw
// grid geometry, ast mode routes each head through its partition kind with
// the matching coefficient node. probe_maps, when given, receives each
// head's post-softmax map.
inline ag::Id attention_forward(ag::Graph& g, ag::Id tokens, const DitBlockNodes& blk,
                                const DitConfig& cfg, const PositionGrid& grid, int64_t layer,
                                RopeMode mode, const HeadPartition* partition, ag::Id alpha_s,
                                ag::Id alpha_t, std::vector<Tensor>* probe_maps = nullptr) {
    check_arg(g.value(tokens).dim(1) == cfg.dim, "token width must equal model width");
    if (mode == RopeMode::ast) {
        check(partition != nullptr, ErrorCode::config_error,
              "head-kind partition required for remapped attention");
        check(partition->layer_count() == cfg.blocks && partition->head_count() == cfg.heads,
              ErrorCode::config_error, "partition does not cover every layer and head");
        check_arg(alpha_s >= 0 && alpha_t >= 0, "coefficient nodes required in remapped mode");
    }
    const RopeFrequencyConfig rope_cfg = cfg.rope();
    const int64_t hd = cfg.head_dim();
    const ag::Id q = g.linear(tokens, blk.wq, blk.bq);
    const ag::Id k = g.linear(tokens, blk.wk, blk.bk);
    const ag::Id v = g.linear(tokens, blk.wv, blk.bv);

    std::vector<ag::Id> head_outs;
    head_outs.reserve(size_t(cfg.heads));
    for (int64_t h = 0; h < cfg.heads; ++h) {
        ag::Id qh = g.cols(q, h * hd, hd);
        ag::Id kh = g.cols(k, h * hd, hd);
        const ag::Id vh = g.cols(v, h * hd, hd);
        if (mode == RopeMode::baseline) {
            qh = ast_rotate(g, qh, grid, rope_cfg, HeadKind::spatial, -1);
            kh = ast_rotate(g, kh, grid, rope_cfg, HeadKind::spatial, -1);
        } else {
            const HeadKind kind = partition->kind(layer, h);
            const ag::Id alpha = kind == HeadKind::spatial ? alpha_s : alpha_t;
            qh = ast_rotate(g, qh, grid, rope_cfg, kind, alpha);
            kh = ast_rotate(g, kh, grid, rope_cfg, kind, alpha);
        }
        const ag::Id scores = g.scale(g.matmul_nt(qh, kh), 1.0 / std::sqrt(double(hd)));
        const ag::Id attn = g.softmax_rows(scores);
        if (probe_maps) probe_maps->push_back(g.value(attn));
        head_outs.push_back(g.matmul(attn, vh));
    }
    const ag::Id merged = cfg.heads == 1 ? head_outs[0] : g.concat_cols(head_outs);
    return g.linear(merged, blk.wo, blk.bo);
}

struct DitOutput {
    ag::Id velocity = -1;
    std::vector<int64_t> tap_blocks;
    std::vector<ag::Id> taps;
    std::vector<std::vector<Tensor>> probe_maps;
};

// Full forward pass over an assembled composite latent. Taps record block
// outputs (post feed-forward, post residual) without altering the graph.
inline DitOutput dit_forward(ag::Graph& g, const DitNodes& n, const DitConfig& cfg,
                             const Tensor& composite, double t, RopeMode mode,
                             const HeadPartition* partition, ag::Id alpha_s, ag::Id alpha_t,
                             bool capture_probe_maps = false) {
    cfg.validate();
    check_arg(composite.rank() == 4 && composite.dim(0) == cfg.frames &&
                  composite.dim(1) == cfg.height && composite.dim(2) == cfg.width &&
                  composite.dim(3) == cfg.cond_channels(),
              "composite latent shape mismatch: " + composite.shape_str());
    check_arg(std::isfinite(t) && t >= 0.0 && t <= 1.0, "timestep must lie in [0,1]");
    check_arg(int64_t(n.blocks.size()) == cfg.blocks, "node set does not match block count");

    const PositionGrid grid = build_position_grid(cfg.frames, cfg.height, cfg.width);
    const ag::Id cond = g.constant(composite.reshaped({cfg.tokens(), cfg.cond_channels()}));
    ag::Id x = g.linear(cond, n.in_w, n.in_b);
    const ag::Id temb = g.linear(g.constant(sinusoidal_embedding(t, cfg.dim)), n.time_w, n.time_b);
    x = g.add_rowvec(x, temb);

    DitOutput out;
    out.tap_blocks = cfg.taps_or_default();
    if (capture_probe_maps) out.probe_maps.resize(size_t(cfg.blocks));
    for (int64_t b = 0; b < cfg.blocks; ++b) {
        const DitBlockNodes& blk = n.blocks[size_t(b)];
        std::vector<Tensor>* probe =
            capture_probe_maps ? &out.probe_maps[size_t(b)] : nullptr;
        const ag::Id normed = g.rmsnorm(x, blk.norm_attn);
        x = g.add(x, attention_forward(g, normed, blk, cfg, grid, b, mode, partition, alpha_s,
                                       alpha_t, probe));
        const ag::Id h = g.gelu(g.linear(g.rmsnorm(x, blk.norm_mlp), blk.w1, blk.b1));
        x = g.add(x, g.linear(h, blk.w2, blk.b2));
        for (int64_t tap : out.tap_blocks)
            if (tap == b) out.taps.push_back(x);
    }
    out.velocity = g.linear(g.rmsnorm(x, n.norm_out), n.out_w, n.out_b);
    return out;
}

// Attention maps of the unmapped model for one composite at probe time t,
// indexed [block][head]; used by the head classifier.
inline std::vector<std::vector<Tensor>> probe_attention_maps(const DitParams& p,
                                                             const Tensor& composite, double t) {
    ag::Graph g(false);
    const DitNodes n = bind_dit(g, p, false);
    const DitOutput out =
        dit_forward(g, n, p.cfg, composite, t, RopeMode::baseline, nullptr, -1, -1, true);
    return out.probe_maps;
}

}  // namespace ffpkit
