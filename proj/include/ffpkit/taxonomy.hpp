#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffpkit/common.hpp"
#include "ffpkit/rope.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

constexpr double kDefaultDensityEpsilon = 1e-6;

// Block density of a (T,T) attention map with T = frames * hw tokens:
// entry (i, j) is the fraction of weights in query-frame block i against
// key-frame block j that exceed epsilon.
inline Tensor compute_density_grid(const Tensor& attn, int64_t frames, int64_t hw,
                                   double epsilon) {
    check_arg(frames >= 1 && hw >= 1, "density grid needs frames >= 1 and hw >= 1");
    check_arg(epsilon >= 0.0, "epsilon must be non-negative");
    const int64_t t = frames * hw;
    check_arg(attn.rank() == 2 && attn.dim(0) == t && attn.dim(1) == t,
              "attention map must be (frames*hw, frames*hw), got " + attn.shape_str());
    Tensor rho({frames, frames});
    for (int64_t i = 0; i < frames; ++i)
        for (int64_t j = 0; j < frames; ++j) {
            int64_t hits = 0;
            for (int64_t r = 0; r < hw; ++r)
                for (int64_t c = 0; c < hw; ++c)
                    if (attn.at(i * hw + r, j * hw + c) > epsilon) ++hits;
            rho.at(i, j) = double(hits) / double(hw * hw);
        }
    return rho;
}

// A head is temporal when its densest cross-frame block is strictly denser
// than its sparsest same-frame block. Single-frame maps have no cross-frame
// blocks and always read as spatial.
inline HeadKind classify_head(const Tensor& density) {
    check_arg(density.rank() == 2 && density.dim(0) == density.dim(1) && density.dim(0) >= 1,
              "density grid must be square");
    const int64_t f = density.dim(0);
    if (f == 1) return HeadKind::spatial;
    double max_cross = -1.0;
    double min_diag = 2.0;
    for (int64_t i = 0; i < f; ++i)
        for (int64_t j = 0; j < f; ++j) {
            if (i == j) {
                min_diag = std::min(min_diag, density.at(i, j));
            } else {
                max_cross = std::max(max_cross, density.at(i, j));
            }
        }
    return max_cross > min_diag ? HeadKind::temporal : HeadKind::spatial;
}

struct HeadVote {
    HeadKind kind = HeadKind::spatial;
    int temporal_votes = 0;
};

// Per-head classification with provenance. single_frame records that the
// probe geometry had one frame, which forces every head spatial.
struct HeadPartition {
    uint64_t model_hash = 0;
    double epsilon = kDefaultDensityEpsilon;
    int64_t samples = 0;
    bool single_frame = false;
    std::vector<std::vector<HeadVote>> layers;

    int64_t layer_count() const { return int64_t(layers.size()); }

    int64_t head_count() const { return layers.empty() ? 0 : int64_t(layers[0].size()); }

    HeadKind kind(int64_t layer, int64_t head) const {
        check_arg(layer >= 0 && layer < layer_count(), "layer out of range");
        check_arg(head >= 0 && head < int64_t(layers[size_t(layer)].size()), "head out of range");
        return layers[size_t(layer)][size_t(head)].kind;
    }
};

// Strict majority of temporal votes flips a head temporal; ties stay spatial.
inline HeadKind vote_kind(int temporal_votes, int64_t samples) {
    return 2 * int64_t(temporal_votes) > samples ? HeadKind::temporal : HeadKind::spatial;
}

// probe(sample) must return attention maps indexed [layer][head], each a
// (frames*hw, frames*hw) row-stochastic matrix for that probe clip.
template <typename ProbeFn>
HeadPartition classify_model(ProbeFn&& probe, int64_t layer_count, int64_t head_count,
                             int64_t frames, int64_t hw, int64_t samples, double epsilon,
                             uint64_t model_hash) {
    check_arg(layer_count >= 1 && head_count >= 1, "need at least one layer and head");
    check_arg(samples >= 1, "need at least one probe sample");
    HeadPartition part;
    part.model_hash = model_hash;
    part.epsilon = epsilon;
    part.samples = samples;
    part.single_frame = frames == 1;
    part.layers.assign(size_t(layer_count), std::vector<HeadVote>(size_t(head_count)));

    for (int64_t s = 0; s < samples; ++s) {
        const std::vector<std::vector<Tensor>> maps = probe(s);
        check_arg(int64_t(maps.size()) == layer_count, "probe returned wrong layer count");
        for (int64_t l = 0; l < layer_count; ++l) {
            check_arg(int64_t(maps[size_t(l)].size()) == head_count,
                      "probe returned wrong head count");
            for (int64_t h = 0; h < head_count; ++h) {
                const Tensor rho =
                    compute_density_grid(maps[size_t(l)][size_t(h)], frames, hw, epsilon);
                if (classify_head(rho) == HeadKind::temporal)
                    ++part.layers[size_t(l)][size_t(h)].temporal_votes;
            }
        }
    }
    for (auto& layer : part.layers)
        for (HeadVote& v : layer) v.kind = vote_kind(v.temporal_votes, samples);
    return part;
}

inline std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return std::string(buf);
}

inline uint64_t parse_hash_hex(const std::string& s) {
    check(s.size() == 16, ErrorCode::config_error, "model hash must be 16 hex digits");
    uint64_t h = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = 10 + (c - 'a');
        else fail(ErrorCode::config_error, "model hash must be lowercase hex");
        h = (h << 4) | uint64_t(d);
    }
    return h;
}

inline nlohmann::json partition_to_json(const HeadPartition& p) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : p.layers) {
        nlohmann::json heads = nlohmann::json::array();
        for (const HeadVote& v : layer)
            heads.push_back({{"kind", head_kind_name(v.kind)},
                             {"temporal_votes", v.temporal_votes}});
        layers.push_back(heads);
    }
    return {{"model_hash", hash_hex(p.model_hash)},
            {"epsilon", p.epsilon},
            {"samples", p.samples},
            {"single_frame", p.single_frame},
            {"layers", layers}};
}

inline HeadPartition partition_from_json(const nlohmann::json& j) {
    HeadPartition p;
    try {
        p.model_hash = parse_hash_hex(j.at("model_hash").get<std::string>());
        p.epsilon = j.at("epsilon").get<double>();
        p.samples = j.at("samples").get<int64_t>();
        p.single_frame = j.at("single_frame").get<bool>();
        for (const auto& layer : j.at("layers")) {
            std::vector<HeadVote> heads;
            for (const auto& head : layer) {
                HeadVote v;
                const std::string kind = head.at("kind").get<std::string>();
                if (kind == "spatial") v.kind = HeadKind::spatial;
                else if (kind == "temporal") v.kind = HeadKind::temporal;
                else fail(ErrorCode::config_error, "unknown head kind: " + kind);
                v.temporal_votes = head.at("temporal_votes").get<int>();
                check(v.temporal_votes >= 0 && v.temporal_votes <= p.samples,
                      ErrorCode::config_error, "temporal_votes out of range");
                heads.push_back(v);
            }
            p.layers.push_back(std::move(heads));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::config_error, std::string("malformed head partition: ") + e.what());
    }
    check(p.samples >= 1, ErrorCode::config_error, "partition needs samples >= 1");
    check(!p.layers.empty(), ErrorCode::config_error, "partition needs at least one layer");
    const size_t heads = p.layers[0].size();
    for (const auto& layer : p.layers)
        check(layer.size() == heads && !layer.empty(), ErrorCode::config_error,
              "partition layers must list the same head count");
    return p;
}

inline void save_partition(const HeadPartition& p, const std::string& path) {
    std::ofstream out(path);
    check(out.good(), ErrorCode::io_error, "cannot open " + path + " for writing");
    out << partition_to_json(p).dump(2) << "\n";
    check(out.good(), ErrorCode::io_error, "failed writing " + path);
}

inline HeadPartition load_partition(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), ErrorCode::io_error, "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::io_error, std::string("cannot parse ") + path + ": " + e.what());
    }
    return partition_from_json(j);
}

}  // namespace ffpkit
