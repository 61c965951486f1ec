// Command-line front end: data generation, head classification, training,
// evaluation, and gradient checking. Exits 0 on success; on failure prints
// one machine-parsable JSON error line to stderr and exits nonzero.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ffpkit/checkpoint.hpp"
#include "ffpkit/config.hpp"
#include "ffpkit/dataset.hpp"
#include "ffpkit/evaluate.hpp"
#include "ffpkit/gradcheck.hpp"
#include "ffpkit/train.hpp"

namespace {

using nlohmann::json;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::trunc);
    ffpkit::check(bool(os), ffpkit::ErrorCode::io_error, "cannot open for writing: " + path);
    os << content;
    os.flush();
    ffpkit::check(bool(os), ffpkit::ErrorCode::io_error, "write failed: " + path);
}

int run_gen_data(uint64_t seed, int64_t count, const std::string& out_path) {
    ffpkit::SynthParams sp;
    const std::vector<ffpkit::FfpSample> samples =
        ffpkit::generate_dataset(seed, sp, count);
    ffpkit::save_dataset(out_path, samples);
    json summary = {{"command", "gen-data"}, {"seed", seed}, {"count", count},
                    {"out", out_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_classify(const std::string& ckpt, int64_t samples, double epsilon,
                 const std::string& out_path) {
    const ffpkit::LoadedRun run = ffpkit::load_run(ckpt);
    const ffpkit::ToyCodec codec =
        ffpkit::make_codec(run.cfg.seed, run.cfg.patch, run.cfg.channels);
    const std::vector<ffpkit::FfpSample> raw =
        ffpkit::generate_dataset(run.cfg.seed, run.cfg.synth(), samples);
    std::vector<ffpkit::EncodedSample> data;
    for (const ffpkit::FfpSample& s : raw) data.push_back(ffpkit::encode_sample(codec, s));

    const ffpkit::HeadPartition part =
        ffpkit::classify_heads(run.params, data, samples, epsilon, run.cfg.seed);
    ffpkit::save_partition(part, out_path);

    int64_t temporal = 0;
    for (const auto& layer : part.layers)
        for (const ffpkit::HeadVote& v : layer)
            if (v.kind == ffpkit::HeadKind::temporal) ++temporal;
    json summary = {{"command", "classify-heads"},
                    {"out", out_path},
                    {"samples", samples},
                    {"epsilon", epsilon},
                    {"temporal_heads", temporal},
                    {"total_heads", part.layer_count() * part.head_count()}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& ablation) {
    ffpkit::RunConfig cfg = ffpkit::load_config(config_path);
    if (!ablation.empty()) cfg.ablation = ffpkit::ablation_from(ablation);
    const ffpkit::TrainOutcome out = ffpkit::train_run(cfg);
    json summary = {{"command", "train"},
                    {"ablation", ffpkit::ablation_name(cfg.ablation)},
                    {"steps", cfg.steps},
                    {"final_total", out.last_report.total},
                    {"final_l_fm", out.last_report.l_fm},
                    {"checkpoint", cfg.checkpoint_path},
                    {"metrics", cfg.metrics_path},
                    {"wall_seconds", out.wall_seconds}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_eval(const std::string& ckpt, const std::string& data_path,
             const std::string& report_path) {
    const ffpkit::LoadedRun run = ffpkit::load_run(ckpt);
    const std::vector<ffpkit::FfpSample> samples = ffpkit::load_dataset(data_path);
    const ffpkit::ToyCodec codec =
        ffpkit::make_codec(run.cfg.seed, run.cfg.patch, run.cfg.channels);
    const ffpkit::HeadPartition* part = run.partition ? &*run.partition : nullptr;
    const ffpkit::EvalReport rep = ffpkit::evaluate_model(
        run.params, run.cfg.mode(), part, samples, codec, run.cfg.seed);
    write_file(report_path, rep.text());
    write_file(report_path + ".tsv", rep.plot_tsv());
    json summary = {{"command", "eval"},
                    {"report", report_path},
                    {"plot_data", report_path + ".tsv"},
                    {"samples", rep.count},
                    {"latent_mse", rep.latent_mse},
                    {"first_frame_mse", rep.first_frame_mse},
                    {"motion_err", rep.motion_err}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_grad_check(const std::string& component, double h) {
    const ffpkit::GradCheckResult res = ffpkit::grad_check(component, h);
    json summary = {{"command", "grad-check"},
                    {"component", component},
                    {"h", h},
                    {"max_rel_err", res.max_rel_err},
                    {"worst", res.worst}};
    std::cout << summary.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"First-frame propagation toolkit"};
    // grad-check owns --h as its step size, so help answers to --help only.
    app.set_help_flag("--help", "Print usage");
    app.require_subcommand(1);

    uint64_t seed = 0;
    int64_t count = 16;
    std::string out_path;
    CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic sample set");
    gen->add_option("--seed", seed, "Run seed");
    gen->add_option("--count", count, "Number of samples");
    gen->add_option("--out", out_path, "Output dataset path")->required();

    std::string ckpt;
    int64_t probe_samples = 8;
    double epsilon = 1e-6;
    std::string manifest_path;
    CLI::App* cls = app.add_subcommand("classify-heads", "Build a head-partition manifest");
    cls->add_option("--ckpt", ckpt, "Checkpoint path")->required();
    cls->add_option("--samples", probe_samples, "Probe clip count");
    cls->add_option("--epsilon", epsilon, "Attention density threshold");
    cls->add_option("--out", manifest_path, "Manifest output path")->required();

    std::string config_path;
    std::string ablation;
    CLI::App* tr = app.add_subcommand("train", "Run a training job");
    tr->add_option("--config", config_path, "Run config JSON")->required();
    tr->add_option("--ablation", ablation, "Override row: baseline|astrope|full");

    std::string eval_ckpt, eval_data, report_path;
    CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    ev->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
    ev->add_option("--data", eval_data, "Dataset path from gen-data")->required();
    ev->add_option("--report", report_path, "Report output path")->required();

    std::string component = "total";
    double h = 1e-6;
    CLI::App* gc = app.add_subcommand("grad-check", "Finite-difference gradient check");
    gc->set_help_flag("--help", "Print usage");
    gc->add_option("--component", component, "flow|motion|mmd|total|linear|model-flow");
    gc->add_option("--h", h, "Finite-difference step");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen_data(seed, count, out_path);
        if (cls->parsed()) return run_classify(ckpt, probe_samples, epsilon, manifest_path);
        if (tr->parsed()) return run_train(config_path, ablation);
        if (ev->parsed()) return run_eval(eval_ckpt, eval_data, report_path);
        if (gc->parsed()) return run_grad_check(component, h);
    } catch (const ffpkit::Error& e) {
        json err = {{"error", ffpkit::error_code_name(e.code())}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        json err = {{"error", "internal"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 2;
    }
    std::cerr << R"({"error":"usage","message":"no subcommand"})" << "\n";
    return 2;
}
