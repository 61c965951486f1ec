#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <vector>

#include "ffpkit/rng.hpp"
#include "ffpkit/taxonomy.hpp"

using namespace ffpkit;

namespace {

// Literal restatement of the density definition, kept independent of the
// library implementation.
double block_density_oracle(const Tensor& attn, int64_t i, int64_t j, int64_t hw, double eps) {
    int64_t hits = 0;
    for (int64_t r = 0; r < hw; ++r)
        for (int64_t c = 0; c < hw; ++c)
            if (attn.at(i * hw + r, j * hw + c) > eps) ++hits;
    return double(hits) / double(hw * hw);
}

HeadKind classify_oracle(const Tensor& attn, int64_t frames, int64_t hw, double eps) {
    if (frames == 1) return HeadKind::spatial;
    double max_cross = -1.0, min_diag = 2.0;
    for (int64_t i = 0; i < frames; ++i)
        for (int64_t j = 0; j < frames; ++j) {
            const double d = block_density_oracle(attn, i, j, hw, eps);
            if (i == j) min_diag = std::min(min_diag, d);
            else max_cross = std::max(max_cross, d);
        }
    return max_cross > min_diag ? HeadKind::temporal : HeadKind::spatial;
}

Tensor random_softmax_map(Rng& rng, int64_t t, double sharpness) {
    Tensor m({t, t});
    m.fill_normal(rng, sharpness);
    for (int64_t r = 0; r < t; ++r) {
        double mx = m.at(r, 0);
        for (int64_t c = 1; c < t; ++c) mx = std::max(mx, m.at(r, c));
        double s = 0.0;
        for (int64_t c = 0; c < t; ++c) {
            m.at(r, c) = std::exp(m.at(r, c) - mx);
            s += m.at(r, c);
        }
        for (int64_t c = 0; c < t; ++c) m.at(r, c) /= s;
    }
    return m;
}

// Row-stochastic map putting every row's mass uniformly on one frame block:
// the token's own frame when `own` is true, the other frame otherwise.
Tensor two_frame_block_map(int64_t hw, bool own) {
    const int64_t t = 2 * hw;
    Tensor m({t, t});
    for (int64_t r = 0; r < t; ++r) {
        const int64_t rf = r / hw;
        const int64_t target = own ? rf : 1 - rf;
        for (int64_t c = 0; c < hw; ++c) m.at(r, target * hw + c) = 1.0 / double(hw);
    }
    return m;
}

}  // namespace

TEST_CASE("density grid matches the counting oracle on random maps") {
    Rng rng(41);
    for (int64_t frames : {2, 3, 4}) {
        for (int64_t hw : {4, 9}) {
            for (int rep = 0; rep < 5; ++rep) {
                const Tensor attn = random_softmax_map(rng, frames * hw, 4.0);
                for (double eps : {1e-6, 1e-2, 0.1}) {
                    const Tensor rho = compute_density_grid(attn, frames, hw, eps);
                    for (int64_t i = 0; i < frames; ++i)
                        for (int64_t j = 0; j < frames; ++j)
                            REQUIRE(rho.at(i, j) == block_density_oracle(attn, i, j, hw, eps));
                }
            }
        }
    }
}

TEST_CASE("classification agrees with the oracle on random maps") {
    Rng rng(42);
    for (int rep = 0; rep < 60; ++rep) {
        const int64_t frames = rng.range(2, 4);
        const int64_t hw = rng.range(2, 9);
        const double eps = rng.uniform(1e-6, 0.2);
        const Tensor attn = random_softmax_map(rng, frames * hw, rng.uniform(1.0, 6.0));
        const Tensor rho = compute_density_grid(attn, frames, hw, eps);
        REQUIRE(classify_head(rho) == classify_oracle(attn, frames, hw, eps));
    }
}

TEST_CASE("hand-built maps classify as expected") {
    const double eps = kDefaultDensityEpsilon;
    const Tensor diag = two_frame_block_map(3, true);
    REQUIRE(classify_head(compute_density_grid(diag, 2, 3, eps)) == HeadKind::spatial);

    const Tensor cross = two_frame_block_map(3, false);
    REQUIRE(classify_head(compute_density_grid(cross, 2, 3, eps)) == HeadKind::temporal);

    // Uniform attention: every block density is 1, no strict winner.
    Tensor uniform = Tensor::full({6, 6}, 1.0 / 6.0);
    REQUIRE(classify_head(compute_density_grid(uniform, 2, 3, eps)) == HeadKind::spatial);

    // Single frame: nothing to compare against, spatial by definition.
    Rng rng(43);
    const Tensor solo = random_softmax_map(rng, 4, 2.0);
    REQUIRE(classify_head(compute_density_grid(solo, 1, 4, eps)) == HeadKind::spatial);
}

TEST_CASE("densities are pointwise non-increasing in epsilon") {
    Rng rng(44);
    const Tensor attn = random_softmax_map(rng, 12, 3.0);
    Tensor prev = compute_density_grid(attn, 3, 4, 0.0);
    for (double eps : {1e-6, 1e-4, 1e-2, 0.05, 0.2, 0.9}) {
        const Tensor cur = compute_density_grid(attn, 3, 4, eps);
        for (int64_t i = 0; i < cur.size(); ++i) REQUIRE(cur[i] <= prev[i]);
        prev = cur;
    }
}

TEST_CASE("density ignores arrangement within a block") {
    Rng rng(45);
    Tensor attn = random_softmax_map(rng, 8, 3.0);
    const Tensor before = compute_density_grid(attn, 2, 4, 1e-3);
    // Swap two entries inside the (0,1) block.
    std::swap(attn.at(0, 4), attn.at(3, 7));
    std::swap(attn.at(1, 5), attn.at(2, 6));
    const Tensor after = compute_density_grid(attn, 2, 4, 1e-3);
    REQUIRE(max_abs_diff(before, after) == 0.0);
}

TEST_CASE("vote thresholds: strict majority, ties stay spatial") {
    REQUIRE(vote_kind(6, 10) == HeadKind::temporal);
    REQUIRE(vote_kind(5, 10) == HeadKind::spatial);
    REQUIRE(vote_kind(0, 10) == HeadKind::spatial);
    REQUIRE(vote_kind(10, 10) == HeadKind::temporal);
    REQUIRE(vote_kind(1, 1) == HeadKind::temporal);
    REQUIRE(vote_kind(2, 3) == HeadKind::temporal);
    REQUIRE(vote_kind(1, 2) == HeadKind::spatial);
}

TEST_CASE("model classification tallies votes across probe clips") {
    const int64_t hw = 2, frames = 2, samples = 10;
    // Head (0,0): cross-frame on 7 of 10 clips. Head (0,1): always own-frame.
    // Head (1,0): cross on exactly 5 (tie). Head (1,1): cross on all.
    auto probe = [&](int64_t s) {
        std::vector<std::vector<Tensor>> maps(2);
        maps[0].push_back(two_frame_block_map(hw, s >= 7));
        maps[0].push_back(two_frame_block_map(hw, true));
        maps[1].push_back(two_frame_block_map(hw, s >= 5));
        maps[1].push_back(two_frame_block_map(hw, false));
        return maps;
    };
    const HeadPartition p = classify_model(probe, 2, 2, frames, hw, samples,
                                           kDefaultDensityEpsilon, 0xabcdULL);
    REQUIRE(p.layer_count() == 2);
    REQUIRE(p.head_count() == 2);
    REQUIRE_FALSE(p.single_frame);
    REQUIRE(p.samples == samples);
    REQUIRE(p.layers[0][0].temporal_votes == 7);
    REQUIRE(p.kind(0, 0) == HeadKind::temporal);
    REQUIRE(p.layers[0][1].temporal_votes == 0);
    REQUIRE(p.kind(0, 1) == HeadKind::spatial);
    REQUIRE(p.layers[1][0].temporal_votes == 5);
    REQUIRE(p.kind(1, 0) == HeadKind::spatial);
    REQUIRE(p.layers[1][1].temporal_votes == 10);
    REQUIRE(p.kind(1, 1) == HeadKind::temporal);
}

TEST_CASE("single-frame probes force a flagged all-spatial partition") {
    Rng rng(46);
    auto probe = [&](int64_t) {
        std::vector<std::vector<Tensor>> maps(1);
        maps[0].push_back(random_softmax_map(rng, 4, 2.0));
        return maps;
    };
    const HeadPartition p = classify_model(probe, 1, 1, 1, 4, 3, 1e-6, 1ULL);
    REQUIRE(p.single_frame);
    REQUIRE(p.kind(0, 0) == HeadKind::spatial);
}

TEST_CASE("partition manifest round-trips through JSON") {
    HeadPartition p;
    p.model_hash = 0x0123456789abcdefULL;
    p.epsilon = 1e-6;
    p.samples = 10;
    p.single_frame = false;
    p.layers = {{HeadVote{HeadKind::temporal, 8}, HeadVote{HeadKind::spatial, 2}},
                {HeadVote{HeadKind::spatial, 5}, HeadVote{HeadKind::temporal, 10}}};

    const std::string path = "partition_roundtrip.json";
    save_partition(p, path);
    const HeadPartition q = load_partition(path);
    REQUIRE(q.model_hash == p.model_hash);
    REQUIRE(q.epsilon == p.epsilon);
    REQUIRE(q.samples == p.samples);
    REQUIRE(q.single_frame == p.single_frame);
    REQUIRE(q.layer_count() == 2);
    for (int64_t l = 0; l < 2; ++l)
        for (int64_t h = 0; h < 2; ++h) {
            REQUIRE(q.kind(l, h) == p.kind(l, h));
            REQUIRE(q.layers[size_t(l)][size_t(h)].temporal_votes ==
                    p.layers[size_t(l)][size_t(h)].temporal_votes);
        }
    std::remove(path.c_str());
}

TEST_CASE("hash text form round-trips and rejects junk") {
    REQUIRE(hash_hex(0x0123456789abcdefULL) == "0123456789abcdef");
    REQUIRE(parse_hash_hex("0123456789abcdef") == 0x0123456789abcdefULL);
    REQUIRE_THROWS_AS(parse_hash_hex("xyz"), Error);
    REQUIRE_THROWS_AS(parse_hash_hex("0123456789ABCDEF"), Error);
}

TEST_CASE("malformed manifests are rejected with config errors") {
    REQUIRE_THROWS_AS(load_partition("no_such_file.json"), Error);

    const std::string path = "partition_bad.json";
    {
        std::ofstream out(path);
        out << "{\"model_hash\": \"0000000000000000\", \"epsilon\": 1e-6}";
    }
    REQUIRE_THROWS_AS(load_partition(path), Error);
    {
        std::ofstream out(path);
        out << "not json at all";
    }
    REQUIRE_THROWS_AS(load_partition(path), Error);
    {
        std::ofstream out(path);
        out << R"({"model_hash": "0000000000000000", "epsilon": 1e-6, "samples": 2,
                   "single_frame": false,
                   "layers": [[{"kind": "diagonal", "temporal_votes": 1}]]})";
    }
    REQUIRE_THROWS_AS(load_partition(path), Error);
    {
        std::ofstream out(path);
        out << R"({"model_hash": "0000000000000000", "epsilon": 1e-6, "samples": 2,
                   "single_frame": false,
                   "layers": [[{"kind": "spatial", "temporal_votes": 7}]]})";
    }
    REQUIRE_THROWS_AS(load_partition(path), Error);
    std::remove(path.c_str());
}

TEST_CASE("density grid validates its inputs") {
    Tensor attn({4, 4});
    REQUIRE_THROWS_AS(compute_density_grid(attn, 2, 3, 1e-6), Error);
    REQUIRE_THROWS_AS(compute_density_grid(attn, 2, 2, -1.0), Error);
    Tensor notsquare({2, 3});
    REQUIRE_THROWS_AS(classify_head(notsquare), Error);
}
