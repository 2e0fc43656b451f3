#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "medood/io_png.hpp"
#include "medood/pipeline.hpp"

namespace fs = std::filesystem;
using namespace medood;

namespace {

DatasetManifest load_subset(const std::string& dir, int fold, bool invert) {
    DatasetManifest manifest = load_manifest(dir);
    if (fold < 0) return manifest;
    return manifest.fold_subset(fold, invert);
}

void add_train_options(CLI::App* cmd, TrainConfig& cfg, bool dotted = false) {
    const std::string p = dotted ? "--train." : "--";
    cmd->add_option(p + "epochs", cfg.epochs, "Training epochs")->capture_default_str();
    cmd->add_option(p + "batch-size", cfg.batch_size, "Batch size")->capture_default_str();
    cmd->add_option(p + "lr", cfg.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option(p + "lambda", cfg.lambda, "Weight of the OoD term in the loss")
        ->capture_default_str();
    cmd->add_option(p + "smooth", cfg.dice_smooth, "Dice smoothing constant")->capture_default_str();
    cmd->add_option(p + "tau", cfg.threshold_tau, "Probability threshold for masks")
        ->capture_default_str();
    cmd->add_flag_function(
        p + "no-batchnorm", [&cfg](std::int64_t) { cfg.batchnorm = false; },
        "Disable batch normalization");
}

void add_synth_options(CLI::App* cmd, SynthConfig& cfg, bool dotted = false) {
    const std::string p = dotted ? "--synth." : "--";
    cmd->add_option(p + "regions", cfg.region_count, "Number of regions")->capture_default_str();
    cmd->add_option(p + "region-min", cfg.region_min_size, "Min region side")->capture_default_str();
    cmd->add_option(p + "region-max", cfg.region_max_size, "Max region side")->capture_default_str();
    cmd->add_option(p + "classes", cfg.num_classes, "Number of foreground classes")
        ->capture_default_str();
    cmd->add_option(p + "density", cfg.class_density,
                    "Per-class target coverage fraction (defaults to 0.08 each)")
        ->delimiter(',');
    cmd->add_option(p + "spurious-rate", cfg.spurious_rate,
                    "Fraction of background covered by the confuser texture")
        ->capture_default_str();
    cmd->add_option(p + "confuser-class", cfg.confuser_class,
                    "Class whose look the confuser mimics")
        ->capture_default_str();
}

DatasetManifest regions_as_manifest(const std::vector<LabeledRegion>& regions, int num_classes) {
    DatasetManifest manifest;
    manifest.classes = synth_class_list(num_classes);
    for (const auto& region : regions) {
        Patch p;
        p.id = region.id;
        p.region_id = region.id;
        p.image = region.image;
        p.labelmap = region.labelmap;
        manifest.patches.push_back(std::move(p));
    }
    return manifest;
}

void print_summary_table(const nlohmann::json& index) {
    std::printf("%-6s %-16s %8s %8s %10s\n", "fold", "mode", "miou", "dsc", "delta_pnr");
    for (const auto& row : index.at("summaries"))
        std::printf("%-6d %-16s %8.4f %8.4f %10.4f\n", row.at("fold").get<int>(),
                    row.at("mode").get<std::string>().c_str(), row.at("miou").get<double>(),
                    row.at("dsc").get<double>(), row.at("delta_pnr").get<double>());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Out-of-distribution patch mining and balanced training for patch segmentation"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled region set");
    synth_cmd->set_config("--config", "", "INI config file");
    SynthConfig synth_cfg;
    std::string synth_out;
    synth_cmd->add_option("--out", synth_out, "Output dataset directory")->required();
    synth_cmd->add_option("--seed", synth_cfg.seed, "Generator seed")->capture_default_str();
    add_synth_options(synth_cmd, synth_cfg);
    synth_cmd->callback([&] {
        const auto regions = generate_synthetic(synth_cfg);
        save_manifest(regions_as_manifest(regions, synth_cfg.num_classes), synth_out);
        std::printf("wrote %zu regions to %s\n", regions.size(), synth_out.c_str());
    });

    // patchify
    auto* patchify_cmd = app.add_subcommand("patchify", "Tile every region into fixed-size patches");
    patchify_cmd->set_config("--config", "", "INI config file");
    std::string patchify_in, patchify_out;
    int patch_size = 32;
    patchify_cmd->add_option("--in", patchify_in, "Input dataset directory")->required();
    patchify_cmd->add_option("--out", patchify_out, "Output dataset directory")->required();
    patchify_cmd->add_option("--patch-size", patch_size, "Patch side length")->capture_default_str();
    patchify_cmd->callback([&] {
        const DatasetManifest in = load_manifest(patchify_in);
        DatasetManifest out;
        out.classes = in.classes;
        for (const auto& src : in.patches) {
            LabeledRegion region{src.id, src.image, src.labelmap};
            for (auto& tile : patchify(region, patch_size)) {
                tile.fold = src.fold;
                out.patches.push_back(std::move(tile));
            }
        }
        save_manifest(out, patchify_out);
        std::printf("wrote %zu patches to %s\n", out.size(), patchify_out.c_str());
    });

    // split
    auto* split_cmd = app.add_subcommand("split", "Assign cross-validation folds by region");
    split_cmd->set_config("--config", "", "INI config file");
    std::string split_in, split_out;
    int split_k = 3;
    std::uint64_t split_seed = 0;
    split_cmd->add_option("--in", split_in, "Input dataset directory")->required();
    split_cmd->add_option("--out", split_out, "Output dataset directory")->required();
    split_cmd->add_option("--k", split_k, "Number of folds")->capture_default_str();
    split_cmd->add_option("--seed", split_seed, "Shuffle seed")->required();
    split_cmd->callback([&] {
        DatasetManifest manifest = load_manifest(split_in);
        split_manifest_folds(manifest, split_k, split_seed);
        save_manifest(manifest, split_out);
        std::printf("assigned %d folds over %zu patches\n", split_k, manifest.size());
    });

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a segmentation model on a dataset");
    train_cmd->set_config("--config", "", "INI config file");
    std::string train_in, train_out, train_mode = "baseline";
    TrainConfig train_cfg;
    int train_fold = -1;
    bool train_invert = false;
    train_cmd->add_option("--in", train_in, "Training dataset directory")->required();
    train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
    train_cmd->add_option("--mode", train_mode, "baseline | med_ood | ood_only")
        ->capture_default_str();
    train_cmd->add_option("--seed", train_cfg.seed, "Training seed")->capture_default_str();
    train_cmd->add_option("--fold", train_fold, "Restrict to one fold (-1 = all)")
        ->capture_default_str();
    train_cmd->add_flag("--invert", train_invert, "Use every fold except --fold");
    add_train_options(train_cmd, train_cfg);
    train_cmd->callback([&] {
        train_cfg.mode = train_mode_from_string(train_mode);
        const DatasetManifest data = load_subset(train_in, train_fold, train_invert);
        auto [model, history] = train(data, train_cfg);
        CheckpointMeta meta;
        meta.num_classes = data.classes.count();
        meta.batchnorm = train_cfg.batchnorm;
        meta.init_seed = train_cfg.seed;
        meta.mode = train_mode;
        meta.lambda = train_cfg.lambda;
        meta.epochs = train_cfg.epochs;
        meta.train_seed = train_cfg.seed;
        meta.threshold_tau = train_cfg.threshold_tau;
        save_checkpoint(model, meta, train_out);
        std::printf("trained %s on %zu patches, final epoch loss %.6f -> %s\n", train_mode.c_str(),
                    data.size(), history.epoch_loss.back(), train_out.c_str());
    });

    // mine-ood
    auto* mine_cmd = app.add_subcommand("mine-ood", "Mine and prune OoD candidates from an ID set");
    mine_cmd->set_config("--config", "", "INI config file");
    std::string mine_in, mine_model, mine_out, mine_scores, mine_removal = "nearest_inpaint";
    double mine_tau = 0.5;
    int mine_fold = -1;
    bool mine_invert = false;
    mine_cmd->add_option("--in", mine_in, "ID dataset directory")->required();
    mine_cmd->add_option("--model", mine_model, "Trained baseline checkpoint")->required();
    mine_cmd->add_option("--out", mine_out, "Output OoD dataset directory")->required();
    mine_cmd->add_option("--scores", mine_scores, "Optional CSV of per-candidate scores");
    mine_cmd->add_option("--removal", mine_removal, "zero_fill | mean_fill | nearest_inpaint")
        ->capture_default_str();
    mine_cmd->add_option("--tau", mine_tau, "Probability threshold")->capture_default_str();
    mine_cmd->add_option("--fold", mine_fold, "Restrict to one fold (-1 = all)")
        ->capture_default_str();
    mine_cmd->add_flag("--invert", mine_invert, "Use every fold except --fold");
    mine_cmd->callback([&] {
        const DatasetManifest d_id = load_subset(mine_in, mine_fold, mine_invert);
        const SegModel model = load_checkpoint(mine_model).first;
        RemovalStrategy strategy;
        strategy.kind = removal_kind_from_string(mine_removal);
        strategy.fallback_mean = dataset_background_mean(d_id);
        auto [d_ood, scores] = mine_ood(model, d_id, strategy, mine_tau);
        save_manifest(d_ood, mine_out);
        if (!mine_scores.empty()) write_ood_scores_csv(mine_scores, scores);
        std::printf("kept %zu of %zu candidates -> %s\n", d_ood.size(), scores.size(),
                    mine_out.c_str());
    });

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "Estimate the optimal OoD percentage");
    est_cmd->set_config("--config", "", "INI config file");
    BalanceConfig est_cfg;
    std::string est_id, est_ood, est_out;
    std::int64_t est_pos = -1, est_neg = -1, est_n_ood = -1;
    est_cmd->add_option("--id", est_id, "ID dataset directory");
    est_cmd->add_option("--ood", est_ood, "OoD dataset directory");
    est_cmd->add_option("--pos", est_pos, "Positive sample count (instead of --id)");
    est_cmd->add_option("--neg", est_neg, "Negative sample count (instead of --id)");
    est_cmd->add_option("--n-ood", est_n_ood, "OoD pool size (instead of --ood)");
    est_cmd->add_option("--pnr-opt", est_cfg.pnr_opt, "Target positive-negative ratio")
        ->capture_default_str();
    est_cmd->add_option("--grid", est_cfg.theta, "Percentage grid")->delimiter(',');
    est_cmd->add_option("--out", est_out, "Write the balance report JSON here");
    est_cmd->callback([&] {
        BalanceReport report;
        if (est_pos >= 0 || est_neg >= 0 || est_n_ood >= 0) {
            if (est_pos < 0 || est_neg < 0 || est_n_ood < 0)
                throw CLI::ValidationError("estimate", "--pos, --neg and --n-ood go together");
            report = estimate_pct_opt(static_cast<std::size_t>(est_pos),
                                      static_cast<std::size_t>(est_neg),
                                      static_cast<std::size_t>(est_n_ood), est_cfg);
        } else {
            if (est_id.empty() || est_ood.empty())
                throw CLI::ValidationError("estimate", "need --id and --ood, or explicit counts");
            report = estimate_pct_opt(load_manifest(est_ood), load_manifest(est_id), est_cfg);
        }
        if (!est_out.empty()) write_balance_json(est_out, report);
        std::printf("pct_opt %.2f  n_ood %zu/%zu  pnr %.6f -> %.6f  delta %.6f\n", report.pct_opt,
                    report.n_ood_selected, report.n_ood_total, report.pnr_id, report.pnr_combined,
                    report.delta_pnr);
    });

    // combine
    auto* combine_cmd = app.add_subcommand("combine", "Sample an OoD subset and merge it into the ID set");
    combine_cmd->set_config("--config", "", "INI config file");
    std::string combine_id, combine_ood, combine_out;
    double combine_pct = 1.0;
    std::uint64_t combine_seed = 0;
    combine_cmd->add_option("--id", combine_id, "ID dataset directory")->required();
    combine_cmd->add_option("--ood", combine_ood, "OoD dataset directory")->required();
    combine_cmd->add_option("--pct", combine_pct, "Fraction of the OoD pool to add")
        ->capture_default_str();
    combine_cmd->add_option("--seed", combine_seed, "Sampling/shuffle seed")->required();
    combine_cmd->add_option("--out", combine_out, "Output dataset directory")->required();
    combine_cmd->callback([&] {
        const DatasetManifest d_id = load_manifest(combine_id);
        const DatasetManifest d_ood = load_manifest(combine_ood);
        const DatasetManifest sampled = sample_ood(d_ood, combine_pct, combine_seed);
        const DatasetManifest combined = combine_and_shuffle(sampled, d_id, combine_seed + 1);
        save_manifest(combined, combine_out);
        std::printf("combined %zu ID + %zu OoD patches, pnr %.6f -> %s\n", d_id.size(),
                    sampled.size(), compute_pnr(combined), combine_out.c_str());
    });

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval_cmd->set_config("--config", "", "INI config file");
    std::string eval_in, eval_model, eval_out;
    double eval_tau = 0.5;
    int eval_fold = -1;
    bool eval_invert = false;
    eval_cmd->add_option("--in", eval_in, "Test dataset directory")->required();
    eval_cmd->add_option("--model", eval_model, "Checkpoint path")->required();
    eval_cmd->add_option("--out", eval_out, "Optional per-patch metrics CSV");
    eval_cmd->add_option("--tau", eval_tau, "Probability threshold")->capture_default_str();
    eval_cmd->add_option("--fold", eval_fold, "Restrict to one fold (-1 = all)")
        ->capture_default_str();
    eval_cmd->add_flag("--invert", eval_invert, "Use every fold except --fold");
    eval_cmd->callback([&] {
        const DatasetManifest test = load_subset(eval_in, eval_fold, eval_invert);
        const SegModel model = load_checkpoint(eval_model).first;
        auto [report, rows] = evaluate_model(model, test, eval_tau);
        if (!eval_out.empty()) write_metrics_csv(eval_out, rows, report, test.classes);
        std::printf("mIoU %.6f  DSC %.6f  fp_rate %.6f over %zu patches\n", report.miou, report.dsc,
                    foreground_fp_rate(model, test, eval_tau), test.size());
    });

    // sweep-pnr
    auto* sweep_cmd = app.add_subcommand("sweep-pnr", "Train/evaluate across OoD percentages");
    sweep_cmd->set_config("--config", "", "INI config file");
    std::string sweep_id, sweep_ood, sweep_test, sweep_out;
    std::vector<double> sweep_pcts = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4};
    TrainConfig sweep_train_cfg;
    std::uint64_t sweep_seed = 0;
    sweep_cmd->add_option("--id", sweep_id, "ID dataset directory")->required();
    sweep_cmd->add_option("--ood", sweep_ood, "OoD dataset directory")->required();
    sweep_cmd->add_option("--test", sweep_test, "Test dataset directory")->required();
    sweep_cmd->add_option("--out", sweep_out, "Output CSV")->required();
    sweep_cmd->add_option("--pcts", sweep_pcts, "Percentage list")->delimiter(',');
    sweep_cmd->add_option("--seed", sweep_seed, "Sampling seed")->required();
    add_train_options(sweep_cmd, sweep_train_cfg);
    sweep_cmd->callback([&] {
        sweep_train_cfg.mode = TrainMode::MedOod;
        const auto rows = sweep_pnr(load_manifest(sweep_id), load_manifest(sweep_ood),
                                    load_manifest(sweep_test), sweep_pcts, sweep_train_cfg,
                                    sweep_seed);
        write_sweep_csv(sweep_out, rows);
        for (const auto& r : rows)
            std::printf("pct %.2f  n_ood %5zu  pnr %.6f  miou %.6f  dsc %.6f\n", r.pct, r.n_ood,
                        r.pnr, r.miou, r.dsc);
    });

    // overlay
    auto* overlay_cmd = app.add_subcommand("overlay", "Render input/GT/prediction overlays");
    overlay_cmd->set_config("--config", "", "INI config file");
    std::string overlay_in, overlay_model, overlay_out;
    int overlay_count = 8;
    double overlay_tau = 0.5;
    overlay_cmd->add_option("--in", overlay_in, "Dataset directory")->required();
    overlay_cmd->add_option("--model", overlay_model, "Checkpoint path")->required();
    overlay_cmd->add_option("--out", overlay_out, "Output directory")->required();
    overlay_cmd->add_option("--count", overlay_count, "How many patches (by id order)")
        ->capture_default_str();
    overlay_cmd->add_option("--tau", overlay_tau, "Probability threshold")->capture_default_str();
    overlay_cmd->callback([&] {
        DatasetManifest data = load_manifest(overlay_in);
        const SegModel model = load_checkpoint(overlay_model).first;
        std::sort(data.patches.begin(), data.patches.end(),
                  [](const Patch& a, const Patch& b) { return a.id < b.id; });
        fs::create_directories(overlay_out);
        const std::size_t n = std::min<std::size_t>(overlay_count, data.size());
        for (std::size_t i = 0; i < n; ++i) {
            const Patch& p = data.patches[i];
            const ClassMasks pred = threshold(predict(model, p), overlay_tau);
            const ClassMasks gt = masks_from_labelmap(p.labelmap, data.classes.count());
            write_png_rgb(fs::path(overlay_out) / (p.id + ".png"), render_overlay(p, pred, gt));
        }
        std::printf("wrote %zu overlays to %s\n", n, overlay_out.c_str());
    });

    // report
    auto* report_cmd = app.add_subcommand("report", "Print the summary table of a finished run");
    std::string report_run;
    report_cmd->add_option("--run", report_run, "Run directory")->required();
    report_cmd->callback([&] {
        std::ifstream in(fs::path(report_run) / "run_index.json");
        if (!in) throw std::runtime_error("no run_index.json under " + report_run);
        nlohmann::json index;
        in >> index;
        print_summary_table(index);
    });

    // run
    auto* run_cmd = app.add_subcommand("run", "Execute the full pipeline into a fresh run directory");
    run_cmd->set_config("--config", "", "INI config file with sections (synth, balance, train, experiments)");
    PipelineConfig pipe_cfg;
    std::string run_out = "run";
    std::string run_removal = "nearest_inpaint";
    run_cmd->add_option("--seed", pipe_cfg.seed, "Master seed; every stage seed derives from it")
        ->required();
    run_cmd->add_option("--out", run_out, "Run directory (must not exist or be empty)")
        ->capture_default_str();
    run_cmd->add_option("--input", pipe_cfg.input_dataset,
                        "Existing dataset directory (skips the synthetic generator)");
    run_cmd->add_option("--patch-size", pipe_cfg.patch_size, "Patch side length")
        ->capture_default_str();
    run_cmd->add_option("--k-folds", pipe_cfg.k_folds, "Cross-validation folds")
        ->capture_default_str();
    run_cmd->add_option("--removal", run_removal, "zero_fill | mean_fill | nearest_inpaint")
        ->capture_default_str();
    add_synth_options(run_cmd, pipe_cfg.synth, true);
    run_cmd->add_option("--balance.pnr-opt", pipe_cfg.balance.pnr_opt,
                        "Target positive-negative ratio")
        ->capture_default_str();
    run_cmd->add_option("--balance.grid", pipe_cfg.balance.theta, "Percentage grid")->delimiter(',');
    add_train_options(run_cmd, pipe_cfg.train, true);
    run_cmd->add_flag("--experiments.ood-only", pipe_cfg.experiment_ood_only,
                      "Also train on OoD data alone");
    run_cmd->add_flag("--experiments.bn-ablation", pipe_cfg.experiment_bn_ablation,
                      "Also train without batch normalization");
    run_cmd->add_flag("--experiments.sweep", pipe_cfg.experiment_sweep,
                      "Also sweep the OoD percentage on the first fold");
    run_cmd->add_option("--experiments.sweep-pcts", pipe_cfg.sweep_pcts, "Sweep percentage list")
        ->delimiter(',');
    run_cmd->callback([&] {
        pipe_cfg.removal = removal_kind_from_string(run_removal);
        const RunResult result = run_pipeline(pipe_cfg, run_out);
        std::ifstream in(result.run_dir / "run_index.json");
        nlohmann::json index;
        in >> index;
        print_summary_table(index);
        std::printf("run artifacts in %s\n", result.run_dir.string().c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
