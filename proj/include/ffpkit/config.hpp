#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffpkit/common.hpp"
#include "ffpkit/dit.hpp"
#include "ffpkit/losses.hpp"
#include "ffpkit/synth.hpp"

namespace ffpkit {

enum class Ablation { baseline, astrope, full };

inline const char* ablation_name(Ablation a) {
    switch (a) {
        case Ablation::baseline: return "baseline";
        case Ablation::astrope: return "astrope";
        case Ablation::full: return "full";
    }
    fail(ErrorCode::invalid_argument, "unknown ablation");
}

inline Ablation ablation_from(const std::string& s) {
    if (s == "baseline") return Ablation::baseline;
    if (s == "astrope") return Ablation::astrope;
    if (s == "full") return Ablation::full;
    fail(ErrorCode::config_error, "unknown ablation '" + s + "'");
}

// Everything a run needs besides the seed it already contains. Serialized as
// JSON with a closed key set: unknown keys are configuration errors.
struct RunConfig {
    uint64_t seed = 0;
    Ablation ablation = Ablation::full;

    // model
    int64_t blocks = 2;
    int64_t dim = 64;
    int64_t heads = 4;
    int64_t predictor_hidden = 64;
    double rope_base = 10000.0;
    std::vector<int64_t> tap_blocks;

    // latent grid
    int64_t frames = 4;
    int64_t height = 8;
    int64_t width = 8;
    int64_t channels = 4;

    // data
    int64_t data_count = 256;
    int64_t pixel_height = 16;
    int64_t pixel_width = 16;
    int64_t patch = 2;

    // loss
    int64_t k_s = 2;
    double lambda_motion = 5.0;
    double lambda_mmd = 1.0;

    // taxonomy
    double epsilon = 1e-6;
    int64_t probe_samples = 8;
    int64_t pretrain_steps = 500;

    // optimizer
    double step_size = 1e-3;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    // loop
    int64_t batch = 4;
    int64_t steps = 2000;

    // outputs
    std::string checkpoint_path = "checkpoint.ffpk";
    std::string metrics_path = "metrics.jsonl";
    std::string partition_path = "partition.json";

    DitConfig dit() const {
        DitConfig c;
        c.blocks = blocks;
        c.dim = dim;
        c.heads = heads;
        c.frames = frames;
        c.height = height;
        c.width = width;
        c.channels = channels;
        c.predictor_hidden = predictor_hidden;
        c.rope_base = rope_base;
        c.tap_blocks = tap_blocks;
        return c;
    }

    SynthParams synth() const { return SynthParams{frames, pixel_height, pixel_width}; }

    RopeMode mode() const {
        return ablation == Ablation::baseline ? RopeMode::baseline : RopeMode::ast;
    }

    // Distillation is active only on the full row.
    LossWeights weights() const {
        if (ablation == Ablation::full) return LossWeights{lambda_motion, lambda_mmd};
        return LossWeights{0.0, 0.0};
    }

    void validate() const {
        dit().validate();
        synth().validate();
        check_arg(pixel_height == height * patch && pixel_width == width * patch,
                  "pixel dims must equal latent dims times the patch size");
        check_arg(channels <= patch * patch * 3, "latent channels exceed the patch dimension");
        check_arg(data_count >= 1, "data count must be positive");
        check_arg(k_s >= 1 && height % k_s == 0 && width % k_s == 0,
                  "k_s must divide the latent height and width");
        LossWeights{lambda_motion, lambda_mmd}.validate();
        check_arg(epsilon > 0.0, "epsilon must be positive");
        check_arg(probe_samples >= 1 && probe_samples <= data_count,
                  "probe sample count must lie in [1, data count]");
        check_arg(pretrain_steps >= 0, "pretrain step count must be nonnegative");
        check_arg(step_size > 0.0 && weight_decay >= 0.0, "bad optimizer settings");
        check_arg(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0,
                  "bad optimizer settings");
        check_arg(batch >= 1 && steps >= 0, "batch must be positive and steps nonnegative");
        check_arg(!checkpoint_path.empty() && !metrics_path.empty() && !partition_path.empty(),
                  "output paths must be nonempty");
    }
};

namespace detail {

using Json = nlohmann::json;

inline void reject_unknown(const Json& obj, const std::string& scope,
                           const std::set<std::string>& allowed) {
    check(obj.is_object(), ErrorCode::config_error, "config section '" + scope +
                                                        "' must be an object");
    for (const auto& item : obj.items())
        check(allowed.count(item.key()) == 1, ErrorCode::config_error,
              "unknown config key '" + (scope.empty() ? "" : scope + ".") + item.key() + "'");
}

template <typename T>
void take(const Json& obj, const char* key, T& into) {
    if (!obj.contains(key)) return;
    try {
        into = obj.at(key).get<T>();
    } catch (const Json::exception& e) {
        fail(ErrorCode::config_error, "config key '" + std::string(key) + "': " + e.what());
    }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    using detail::take;
    detail::reject_unknown(j, "", {"seed", "ablation", "model", "latent", "data", "loss",
                                   "taxonomy", "optim", "train", "out"});
    RunConfig c;
    take(j, "seed", c.seed);
    if (j.contains("ablation")) c.ablation = ablation_from(j.at("ablation").get<std::string>());

    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::reject_unknown(
            m, "model", {"blocks", "dim", "heads", "predictor_hidden", "rope_base", "tap_blocks"});
        take(m, "blocks", c.blocks);
        take(m, "dim", c.dim);
        take(m, "heads", c.heads);
        take(m, "predictor_hidden", c.predictor_hidden);
        take(m, "rope_base", c.rope_base);
        take(m, "tap_blocks", c.tap_blocks);
    }
    if (j.contains("latent")) {
        const auto& m = j.at("latent");
        detail::reject_unknown(m, "latent", {"frames", "height", "width", "channels"});
        take(m, "frames", c.frames);
        take(m, "height", c.height);
        take(m, "width", c.width);
        take(m, "channels", c.channels);
    }
    if (j.contains("data")) {
        const auto& m = j.at("data");
        detail::reject_unknown(m, "data", {"count", "pixel_height", "pixel_width", "patch"});
        take(m, "count", c.data_count);
        take(m, "pixel_height", c.pixel_height);
        take(m, "pixel_width", c.pixel_width);
        take(m, "patch", c.patch);
    }
    if (j.contains("loss")) {
        const auto& m = j.at("loss");
        detail::reject_unknown(m, "loss", {"k_s", "lambda_motion", "lambda_mmd"});
        take(m, "k_s", c.k_s);
        take(m, "lambda_motion", c.lambda_motion);
        take(m, "lambda_mmd", c.lambda_mmd);
    }
    if (j.contains("taxonomy")) {
        const auto& m = j.at("taxonomy");
        detail::reject_unknown(m, "taxonomy", {"epsilon", "samples", "pretrain_steps"});
        take(m, "epsilon", c.epsilon);
        take(m, "samples", c.probe_samples);
        take(m, "pretrain_steps", c.pretrain_steps);
    }
    if (j.contains("optim")) {
        const auto& m = j.at("optim");
        detail::reject_unknown(m, "optim",
                               {"step_size", "weight_decay", "beta1", "beta2", "eps"});
        take(m, "step_size", c.step_size);
        take(m, "weight_decay", c.weight_decay);
        take(m, "beta1", c.beta1);
        take(m, "beta2", c.beta2);
        take(m, "eps", c.adam_eps);
    }
    if (j.contains("train")) {
        const auto& m = j.at("train");
        detail::reject_unknown(m, "train", {"batch", "steps"});
        take(m, "batch", c.batch);
        take(m, "steps", c.steps);
    }
    if (j.contains("out")) {
        const auto& m = j.at("out");
        detail::reject_unknown(m, "out", {"checkpoint", "metrics", "partition"});
        take(m, "checkpoint", c.checkpoint_path);
        take(m, "metrics", c.metrics_path);
        take(m, "partition", c.partition_path);
    }
    c.validate();
    return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["ablation"] = ablation_name(c.ablation);
    j["model"] = {{"blocks", c.blocks},
                  {"dim", c.dim},
                  {"heads", c.heads},
                  {"predictor_hidden", c.predictor_hidden},
                  {"rope_base", c.rope_base},
                  {"tap_blocks", c.tap_blocks}};
    j["latent"] = {{"frames", c.frames},
                   {"height", c.height},
                   {"width", c.width},
                   {"channels", c.channels}};
    j["data"] = {{"count", c.data_count},
                 {"pixel_height", c.pixel_height},
                 {"pixel_width", c.pixel_width},
                 {"patch", c.patch}};
    j["loss"] = {{"k_s", c.k_s},
                 {"lambda_motion", c.lambda_motion},
                 {"lambda_mmd", c.lambda_mmd}};
    j["taxonomy"] = {{"epsilon", c.epsilon},
                     {"samples", c.probe_samples},
                     {"pretrain_steps", c.pretrain_steps}};
    j["optim"] = {{"step_size", c.step_size},
                  {"weight_decay", c.weight_decay},
                  {"beta1", c.beta1},
                  {"beta2", c.beta2},
                  {"eps", c.adam_eps}};
    j["train"] = {{"batch", c.batch}, {"steps", c.steps}};
    j["out"] = {{"checkpoint", c.checkpoint_path},
                {"metrics", c.metrics_path},
                {"partition", c.partition_path}};
    return j;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    check(bool(is), ErrorCode::io_error, "cannot open config: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::config_error, "config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

inline void save_config(const RunConfig& c, const std::string& path) {
    std::ofstream os(path);
    check(bool(os), ErrorCode::io_error, "cannot open for writing: " + path);
    os << config_to_json(c).dump(2) << "\n";
    check(bool(os), ErrorCode::io_error, "write failed: " + path);
}

}  // namespace ffpkit
