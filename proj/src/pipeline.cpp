#include "medood/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "medood/io_png.hpp"

namespace medood {

namespace {

using json = nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stage seeds all derive from the run seed so a rerun with the same seed
// reproduces every artifact byte for byte.
std::uint64_t stage_seed(std::uint64_t run_seed, std::uint64_t stage) {
    return splitmix64(run_seed ^ splitmix64(stage));
}

constexpr std::uint64_t kStageSynth = 1;
constexpr std::uint64_t kStageSplit = 2;
std::uint64_t fold_stage(int fold, int slot) {
    return 16 + static_cast<std::uint64_t>(fold) * 16 + slot;
}
constexpr int kSlotBaseline = 0;
constexpr int kSlotSample = 1;
constexpr int kSlotCombine = 2;
constexpr int kSlotMedOod = 3;
constexpr int kSlotOodOnly = 4;
constexpr int kSlotBaselineNoBn = 5;
constexpr int kSlotMedOodNoBn = 6;
constexpr int kSlotSweep = 7;

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::ofstream open_text(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
    auto out = open_text(path);
    out << j.dump(2) << "\n";
}

struct EvalArtifacts {
    MetricsReport report;
    double fp_rate = 0.0;
};

EvalArtifacts eval_and_write(const SegModel& model, const DatasetManifest& test, double tau,
                             const std::filesystem::path& csv_path) {
    auto [report, rows] = evaluate_model(model, test, tau);
    write_metrics_csv(csv_path, rows, report, test.classes);
    return {report, foreground_fp_rate(model, test, tau)};
}

CheckpointMeta meta_for(const TrainConfig& cfg, int num_classes) {
    CheckpointMeta meta;
    meta.num_classes = num_classes;
    meta.batchnorm = cfg.batchnorm;
    meta.init_seed = cfg.seed;
    meta.mode = to_string(cfg.mode);
    meta.lambda = cfg.lambda;
    meta.epochs = cfg.epochs;
    meta.train_seed = cfg.seed;
    meta.threshold_tau = cfg.threshold_tau;
    return meta;
}

void render_fold_overlays(const SegModel& model, const DatasetManifest& test, double tau,
                          const std::filesystem::path& dir, const std::string& prefix) {
    std::vector<const Patch*> ordered;
    for (const auto& p : test.patches) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(),
              [](const Patch* a, const Patch* b) { return a->id < b->id; });
    const std::size_t n = std::min<std::size_t>(4, ordered.size());
    const int num_classes = test.classes.count();
    for (std::size_t i = 0; i < n; ++i) {
        const Patch& p = *ordered[i];
        const ClassMasks pred = threshold(predict(model, p), tau);
        const ClassMasks gt = masks_from_labelmap(p.labelmap, num_classes);
        write_png_rgb(dir / (prefix + "_" + p.id + ".png"), render_overlay(p, pred, gt));
    }
}

}  // namespace

void PipelineConfig::validate() const {
    if (patch_size <= 0 || patch_size % 4 != 0)
        throw std::invalid_argument("patch_size must be a positive multiple of 4");
    if (k_folds < 2) throw std::invalid_argument("k_folds must be >= 2");
    balance.validate();
    train.validate();
    if (input_dataset.empty()) synth.validate();
    if (experiment_sweep) {
        if (sweep_pcts.empty()) throw std::invalid_argument("sweep_pcts must be non-empty");
        for (double p : sweep_pcts)
            if (p < 0.0 || p > 1.0) throw std::invalid_argument("sweep pcts must be in [0,1]");
    }
}

std::pair<MetricsReport, std::vector<PatchMetrics>> evaluate_model(const SegModel& model,
                                                                   const DatasetManifest& test,
                                                                   double tau) {
    const int num_classes = test.classes.count();
    std::vector<PatchMetrics> rows;
    rows.reserve(test.size());
    for (const auto& patch : test.patches) {
        const ClassMasks pred = threshold(predict(model, patch), tau);
        const ClassMasks gt = masks_from_labelmap(patch.labelmap, num_classes);
        rows.push_back(evaluate_patch(patch.id, pred, gt));
    }
    std::sort(rows.begin(), rows.end(),
              [](const PatchMetrics& a, const PatchMetrics& b) { return a.patch_id < b.patch_id; });
    MetricsReport report = aggregate(rows, test.classes);
    return {std::move(report), std::move(rows)};
}

double foreground_fp_rate(const SegModel& model, const DatasetManifest& test, double tau) {
    std::size_t fp = 0, background = 0;
    for (const auto& patch : test.patches) {
        const ClassMasks pred = threshold(predict(model, patch), tau);
        for (int y = 0; y < patch.labelmap.h; ++y) {
            for (int x = 0; x < patch.labelmap.w; ++x) {
                if (patch.labelmap.at(y, x) != 0) continue;
                ++background;
                for (const auto& mask : pred) {
                    if (mask.at(y, x)) {
                        ++fp;
                        break;
                    }
                }
            }
        }
    }
    if (background == 0) return 0.0;
    return static_cast<double>(fp) / static_cast<double>(background);
}

double empty_predictor_miou(const DatasetManifest& test) {
    if (test.empty()) throw std::invalid_argument("empty test set");
    const int num_classes = test.classes.count();
    double sum = 0.0;
    for (const auto& patch : test.patches) {
        std::vector<bool> present(num_classes + 1, false);
        for (auto v : patch.labelmap.d) present[v] = true;
        int absent = 0;
        for (int c = 1; c <= num_classes; ++c) absent += !present[c];
        sum += static_cast<double>(absent) / num_classes;
    }
    return sum / static_cast<double>(test.size());
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<PatchMetrics>& rows,
                       const MetricsReport& summary, const ClassList& classes) {
    auto out = open_text(path);
    out << "patch_id";
    for (const auto& name : classes.names) out << ",iou_" << name;
    for (const auto& name : classes.names) out << ",dsc_" << name;
    out << ",miou,dsc\n";
    for (const auto& r : rows) {
        out << r.patch_id;
        for (double v : r.per_class_iou) out << "," << fmt6(v);
        for (double v : r.per_class_dsc) out << "," << fmt6(v);
        out << "," << fmt6(r.miou) << "," << fmt6(r.dsc) << "\n";
    }
    out << "mean";
    for (const auto& name : classes.names) out << "," << fmt6(summary.per_class_iou.at(name));
    for (std::size_t i = 0; i < classes.names.size(); ++i) out << ",";
    out << "," << fmt6(summary.miou) << "," << fmt6(summary.dsc) << "\n";
}

void write_ood_scores_csv(const std::filesystem::path& path, const std::vector<OodScore>& scores) {
    auto out = open_text(path);
    out << "patch_id,score,kept\n";
    for (const auto& s : scores) out << s.patch_id << "," << fmt6(s.score) << "," << (s.kept ? 1 : 0) << "\n";
}

void write_balance_json(const std::filesystem::path& path, const BalanceReport& report) {
    json curve = json::array();
    for (const auto& [pct, f] : report.objective_curve) curve.push_back({{"pct", pct}, {"objective", f}});
    write_json(path, json{
                         {"pos_count", report.pos_count},
                         {"neg_count", report.neg_count},
                         {"pnr_id", report.pnr_id},
                         {"pnr_opt", report.pnr_opt},
                         {"pct_opt", report.pct_opt},
                         {"pnr_combined", report.pnr_combined},
                         {"delta_pnr", report.delta_pnr},
                         {"n_ood_total", report.n_ood_total},
                         {"n_ood_selected", report.n_ood_selected},
                         {"objective_curve", curve},
                     });
}

std::pair<DatasetManifest, std::vector<OodScore>> mine_ood(const SegModel& model,
                                                           const DatasetManifest& d_id,
                                                           const RemovalStrategy& strategy,
                                                           double tau) {
    DatasetManifest unfiltered;
    unfiltered.classes = d_id.classes;
    unfiltered.patches.reserve(d_id.size());
    for (const auto& patch : d_id.patches) unfiltered.patches.push_back(remove_foreground(patch, strategy));
    PredictFn fn = [&model](const Patch& p) { return predict(model, p); };
    return prune_ood(fn, unfiltered, tau);
}

std::vector<SweepRow> sweep_pnr(const DatasetManifest& d_id, const DatasetManifest& d_ood,
                                const DatasetManifest& test, const std::vector<double>& pcts,
                                const TrainConfig& train_config, std::uint64_t sample_seed) {
    std::vector<SweepRow> rows;
    rows.reserve(pcts.size());
    TrainConfig cfg = train_config;
    cfg.mode = TrainMode::MedOod;
    for (std::size_t i = 0; i < pcts.size(); ++i) {
        SweepRow row;
        row.pct = pcts[i];
        // One sample seed for every row: larger pcts take nested supersets, so
        // the sweep varies only the amount of OoD data.
        DatasetManifest sampled = sample_ood(d_ood, pcts[i], sample_seed);
        row.n_ood = sampled.size();
        DatasetManifest combined = combine_and_shuffle(sampled, d_id, splitmix64(sample_seed + i + 1));
        row.pnr = compute_pnr(combined);
        const SegModel model = train(combined, cfg).first;
        const MetricsReport report = evaluate_model(model, test, cfg.threshold_tau).first;
        row.miou = report.miou;
        row.dsc = report.dsc;
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    auto out = open_text(path);
    out << "pct,n_ood,pnr,miou,dsc\n";
    for (const auto& r : rows)
        out << fmt6(r.pct) << "," << r.n_ood << "," << fmt6(r.pnr) << "," << fmt6(r.miou) << ","
            << fmt6(r.dsc) << "\n";
}

std::array<std::uint8_t, 3> class_color(int cls) {
    static const std::array<std::uint8_t, 3> palette[6] = {
        {230, 25, 75}, {60, 180, 75}, {255, 225, 25}, {0, 130, 200}, {245, 130, 48}, {145, 30, 180}};
    if (cls < 1 || cls > 6) throw std::invalid_argument("class index out of palette range");
    return palette[cls - 1];
}

ImageU8 render_overlay(const Patch& patch, const ClassMasks& pred, const ClassMasks& gt) {
    const int h = patch.image.h, w = patch.image.w;
    const int gap = 2;
    ImageU8 out(h, 3 * w + 2 * gap, 3, 255);
    auto blend_panel = [&](int panel, const ClassMasks* masks) {
        const int x0 = panel * (w + gap);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                int rgb[3] = {patch.image.at(y, x, 0), patch.image.at(y, x, 1), patch.image.at(y, x, 2)};
                if (masks) {
                    for (std::size_t c = 0; c < masks->size(); ++c) {
                        if (!(*masks)[c].at(y, x)) continue;
                        const auto color = class_color(static_cast<int>(c) + 1);
                        for (int ch = 0; ch < 3; ++ch) rgb[ch] = (rgb[ch] * 45 + color[ch] * 55) / 100;
                        break;
                    }
                }
                for (int ch = 0; ch < 3; ++ch)
                    out.at(y, x0 + x, ch) = static_cast<std::uint8_t>(rgb[ch]);
            }
        }
    };
    blend_panel(0, nullptr);
    blend_panel(1, &gt);
    blend_panel(2, &pred);
    return out;
}

std::vector<PerClassRow> per_class_report(const SegModel& baseline, const SegModel& med_ood,
                                          const SegModel* ood_only, const DatasetManifest& test,
                                          double tau) {
    const auto base = evaluate_model(baseline, test, tau).first;
    const auto med = evaluate_model(med_ood, test, tau).first;
    MetricsReport ood;
    if (ood_only) ood = evaluate_model(*ood_only, test, tau).first;
    std::vector<PerClassRow> rows;
    for (const auto& name : test.classes.names) {
        PerClassRow row;
        row.class_name = name;
        row.baseline = base.per_class_iou.at(name);
        row.med_ood = med.per_class_iou.at(name);
        if (ood_only) row.ood_only = ood.per_class_iou.at(name);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_per_class_csv(const std::filesystem::path& path, const std::vector<PerClassRow>& rows) {
    auto out = open_text(path);
    const bool with_ood = !rows.empty() && rows.front().ood_only.has_value();
    out << "class,baseline_iou,med_ood_iou";
    if (with_ood) out << ",ood_only_iou";
    out << "\n";
    for (const auto& r : rows) {
        out << r.class_name << "," << fmt6(r.baseline) << "," << fmt6(r.med_ood);
        if (with_ood) out << "," << fmt6(r.ood_only.value());
        out << "\n";
    }
}

std::vector<std::size_t> class_presence_counts(const DatasetManifest& manifest) {
    const int num_classes = manifest.classes.count();
    std::vector<std::size_t> counts(num_classes, 0);
    for (const auto& patch : manifest.patches) {
        std::vector<bool> present(num_classes + 1, false);
        for (auto v : patch.labelmap.d) present[v] = true;
        for (int c = 1; c <= num_classes; ++c) counts[c - 1] += present[c];
    }
    return counts;
}

RunResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& run_dir) {
    config.validate();
    if (std::filesystem::exists(run_dir) && !std::filesystem::is_empty(run_dir))
        throw std::runtime_error("run dir is not empty: " + run_dir.string());
    std::filesystem::create_directories(run_dir);

    DatasetManifest manifest;
    if (config.input_dataset.empty()) {
        SynthConfig synth = config.synth;
        synth.seed = stage_seed(config.seed, kStageSynth);
        const auto regions = generate_synthetic(synth);
        manifest.classes = synth_class_list(synth.num_classes);
        const auto region_folds = split_folds(regions, config.k_folds, stage_seed(config.seed, kStageSplit));
        for (const auto& region : regions)
            for (auto& patch : patchify(region, config.patch_size)) {
                patch.fold = region_folds.at(region.id);
                manifest.patches.push_back(std::move(patch));
            }
    } else {
        manifest = load_manifest(config.input_dataset);
        bool has_folds = !manifest.patches.empty();
        for (const auto& p : manifest.patches) has_folds = has_folds && p.fold >= 0;
        if (!has_folds) split_manifest_folds(manifest, config.k_folds, stage_seed(config.seed, kStageSplit));
    }
    save_manifest(manifest, run_dir / "dataset");

    json index;
    index["seed"] = config.seed;
    index["patch_size"] = config.patch_size;
    index["k_folds"] = config.k_folds;
    index["removal"] = to_string(config.removal);
    index["pnr_opt"] = config.balance.pnr_opt;
    index["dataset"] = {{"dir", "dataset"},
                        {"patches", manifest.size()},
                        {"classes", manifest.classes.names}};
    index["folds"] = json::array();

    RunResult result;
    result.run_dir = run_dir;

    std::vector<int> fold_ids;
    for (const auto& [region, fold] : manifest.folds())
        if (std::find(fold_ids.begin(), fold_ids.end(), fold) == fold_ids.end())
            fold_ids.push_back(fold);
    std::sort(fold_ids.begin(), fold_ids.end());

    for (int fold : fold_ids) {
        const DatasetManifest test = manifest.fold_subset(fold);
        const DatasetManifest d_id = manifest.fold_subset(fold, true);
        const auto fold_dir = run_dir / ("fold_" + std::to_string(fold));
        std::filesystem::create_directories(fold_dir);
        json fold_json;
        fold_json["fold"] = fold;
        fold_json["train_patches"] = d_id.size();
        fold_json["test_patches"] = test.size();

        // The summary's delta column reports each model's own training set:
        // |pnr(that set) - pnr_opt|.
        auto push_summary = [&](const std::string& mode, const EvalArtifacts& ev, double delta_pnr) {
            result.summaries.push_back({fold, mode, ev.report.miou, ev.report.dsc, delta_pnr});
            fold_json["metrics"][mode] = {{"miou", ev.report.miou},
                                          {"dsc", ev.report.dsc},
                                          {"fp_rate", ev.fp_rate},
                                          {"delta_pnr", delta_pnr}};
        };

        TrainConfig base_cfg = config.train;
        base_cfg.mode = TrainMode::Baseline;
        base_cfg.seed = stage_seed(config.seed, fold_stage(fold, kSlotBaseline));
        auto [baseline, base_hist] = train(d_id, base_cfg);
        fold_json["training"]["baseline"] = base_hist.epoch_loss;
        save_checkpoint(baseline, meta_for(base_cfg, manifest.classes.count()), fold_dir / "baseline.ckpt");
        const auto base_ev = eval_and_write(baseline, test, config.train.threshold_tau,
                                            fold_dir / "baseline_metrics.csv");

        RemovalStrategy strategy;
        strategy.kind = config.removal;
        strategy.fallback_mean = dataset_background_mean(d_id);
        auto [d_ood, scores] = mine_ood(baseline, d_id, strategy, config.train.threshold_tau);
        write_ood_scores_csv(fold_dir / "ood_scores.csv", scores);
        save_manifest(d_ood, fold_dir / "ood");
        const auto presence = class_presence_counts(d_ood);
        for (std::size_t c = 0; c < presence.size(); ++c)
            if (presence[c] != 0)
                throw std::runtime_error("mined OoD set contains foreground of class " +
                                         manifest.classes.name(static_cast<int>(c) + 1));
        fold_json["ood"] = {{"candidates", scores.size()}, {"kept", d_ood.size()}};

        const BalanceReport balance = estimate_pct_opt(d_ood, d_id, config.balance);
        write_balance_json(fold_dir / "balance.json", balance);
        fold_json["balance"] = {{"pct_opt", balance.pct_opt},
                                {"pnr_id", balance.pnr_id},
                                {"pnr_combined", balance.pnr_combined},
                                {"delta_pnr", balance.delta_pnr},
                                {"n_ood_selected", balance.n_ood_selected}};

        const DatasetManifest d_ood_opt =
            sample_ood(d_ood, balance.pct_opt, stage_seed(config.seed, fold_stage(fold, kSlotSample)));
        const DatasetManifest combined = combine_and_shuffle(
            d_ood_opt, d_id, stage_seed(config.seed, fold_stage(fold, kSlotCombine)));
        save_manifest(combined, fold_dir / "combined");

        TrainConfig med_cfg = config.train;
        med_cfg.mode = TrainMode::MedOod;
        med_cfg.seed = stage_seed(config.seed, fold_stage(fold, kSlotMedOod));
        auto [med_ood, med_hist] = train(combined, med_cfg);
        fold_json["training"]["med_ood"] = med_hist.epoch_loss;
        save_checkpoint(med_ood, meta_for(med_cfg, manifest.classes.count()), fold_dir / "med_ood.ckpt");
        const auto med_ev =
            eval_and_write(med_ood, test, config.train.threshold_tau, fold_dir / "med_ood_metrics.csv");

        const double delta_id = std::abs(balance.pnr_id - config.balance.pnr_opt);
        push_summary("baseline", base_ev, delta_id);
        push_summary("med_ood", med_ev, balance.delta_pnr);

        SegModel* ood_only_ptr = nullptr;
        SegModel ood_only_model;
        if (config.experiment_ood_only) {
            TrainConfig ood_cfg = config.train;
            ood_cfg.mode = TrainMode::OodOnly;
            ood_cfg.seed = stage_seed(config.seed, fold_stage(fold, kSlotOodOnly));
            auto [model, hist] = train(d_ood, ood_cfg);
            fold_json["training"]["ood_only"] = hist.epoch_loss;
            ood_only_model = std::move(model);
            ood_only_ptr = &ood_only_model;
            save_checkpoint(ood_only_model, meta_for(ood_cfg, manifest.classes.count()),
                            fold_dir / "ood_only.ckpt");
            const auto ev = eval_and_write(ood_only_model, test, config.train.threshold_tau,
                                           fold_dir / "ood_only_metrics.csv");
            push_summary("ood_only", ev, std::abs(compute_pnr(d_ood) - config.balance.pnr_opt));
            fold_json["empty_predictor_miou"] = empty_predictor_miou(test);
        }

        if (config.experiment_bn_ablation) {
            TrainConfig nb_base = base_cfg;
            nb_base.batchnorm = false;
            nb_base.seed = stage_seed(config.seed, fold_stage(fold, kSlotBaselineNoBn));
            const SegModel model_b = train(d_id, nb_base).first;
            save_checkpoint(model_b, meta_for(nb_base, manifest.classes.count()),
                            fold_dir / "baseline_nobn.ckpt");
            push_summary("baseline_nobn",
                         eval_and_write(model_b, test, config.train.threshold_tau,
                                        fold_dir / "baseline_nobn_metrics.csv"),
                         delta_id);

            TrainConfig nb_med = med_cfg;
            nb_med.batchnorm = false;
            nb_med.seed = stage_seed(config.seed, fold_stage(fold, kSlotMedOodNoBn));
            const SegModel model_m = train(combined, nb_med).first;
            save_checkpoint(model_m, meta_for(nb_med, manifest.classes.count()),
                            fold_dir / "med_ood_nobn.ckpt");
            push_summary("med_ood_nobn",
                         eval_and_write(model_m, test, config.train.threshold_tau,
                                        fold_dir / "med_ood_nobn_metrics.csv"),
                         balance.delta_pnr);
        }

        if (config.experiment_sweep && fold == fold_ids.front()) {
            TrainConfig sweep_cfg = config.train;
            sweep_cfg.seed = stage_seed(config.seed, fold_stage(fold, kSlotSweep));
            const auto rows = sweep_pnr(d_id, d_ood, test, config.sweep_pcts, sweep_cfg,
                                        stage_seed(config.seed, fold_stage(fold, kSlotSweep) + 1));
            write_sweep_csv(fold_dir / "sweep.csv", rows);
        }

        write_per_class_csv(fold_dir / "per_class.csv",
                            per_class_report(baseline, med_ood, ood_only_ptr, test,
                                             config.train.threshold_tau));
        render_fold_overlays(baseline, test, config.train.threshold_tau, fold_dir / "overlays",
                             "baseline");
        render_fold_overlays(med_ood, test, config.train.threshold_tau, fold_dir / "overlays",
                             "med_ood");

        index["folds"].push_back(std::move(fold_json));
    }

    {
        auto out = open_text(run_dir / "summary.csv");
        out << "fold,mode,miou,dsc,delta_pnr\n";
        std::vector<std::string> modes;
        for (const auto& s : result.summaries) {
            out << s.fold << "," << s.mode << "," << fmt6(s.miou) << "," << fmt6(s.dsc) << ","
                << fmt6(s.delta_pnr) << "\n";
            if (std::find(modes.begin(), modes.end(), s.mode) == modes.end()) modes.push_back(s.mode);
        }
        for (const auto& mode : modes) {
            double miou = 0.0, dsc = 0.0, delta = 0.0;
            int n = 0;
            for (const auto& s : result.summaries) {
                if (s.mode != mode) continue;
                miou += s.miou;
                dsc += s.dsc;
                delta += s.delta_pnr;
                ++n;
            }
            out << "mean," << mode << "," << fmt6(miou / n) << "," << fmt6(dsc / n) << ","
                << fmt6(delta / n) << "\n";
        }
    }

    json summary_rows = json::array();
    for (const auto& s : result.summaries)
        summary_rows.push_back({{"fold", s.fold},
                                {"mode", s.mode},
                                {"miou", s.miou},
                                {"dsc", s.dsc},
                                {"delta_pnr", s.delta_pnr}});
    index["summaries"] = std::move(summary_rows);

    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(run_dir))
        if (entry.is_regular_file())
            files.push_back(std::filesystem::relative(entry.path(), run_dir).generic_string());
    std::sort(files.begin(), files.end());
    files.push_back("run_index.json");
    index["files"] = files;
    write_json(run_dir / "run_index.json", index);
    return result;
}

}  // namespace medood
