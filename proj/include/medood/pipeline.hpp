#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "medood/balance.hpp"
#include "medood/metrics.hpp"
#include "medood/ood.hpp"
#include "medood/synth.hpp"
#include "medood/train.hpp"

namespace medood {

struct PipelineConfig {
    SynthConfig synth;
    int patch_size = 32;
    int k_folds = 3;
    BalanceConfig balance;
    TrainConfig train;
    RemovalKind removal = RemovalKind::NearestInpaint;
    std::uint64_t seed = 0;
    // Optional input dataset dir; when empty the synthetic generator feeds the run.
    std::string input_dataset;
    // Extra experiment stages.
    bool experiment_ood_only = false;
    bool experiment_bn_ablation = false;
    bool experiment_sweep = false;
    std::vector<double> sweep_pcts = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4};

    void validate() const;
};

// Model predictions evaluated against manifest ground truth; patches sorted by
// id before aggregation.
std::pair<MetricsReport, std::vector<PatchMetrics>> evaluate_model(const SegModel& model,
                                                                   const DatasetManifest& test,
                                                                   double tau);

// Pixels predicted as any foreground class where the ground truth is
// non-foreground, over all ground-truth non-foreground pixels.
double foreground_fp_rate(const SegModel& model, const DatasetManifest& test, double tau);

// Closed-form mIoU of the all-empty predictor: mean over patches of
// (#classes absent from the patch) / |C|. Oracle for the OoD-only paradigm.
double empty_predictor_miou(const DatasetManifest& test);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<PatchMetrics>& rows,
                       const MetricsReport& summary, const ClassList& classes);
void write_ood_scores_csv(const std::filesystem::path& path, const std::vector<OodScore>& scores);
void write_balance_json(const std::filesystem::path& path, const BalanceReport& report);

// Mines the unfiltered OoD set from d_id (foreground removal on every patch),
// prunes it with the model, returns the pruned manifest and all scores.
std::pair<DatasetManifest, std::vector<OodScore>> mine_ood(const SegModel& model,
                                                           const DatasetManifest& d_id,
                                                           const RemovalStrategy& strategy,
                                                           double tau);

struct FoldSummary {
    int fold = 0;
    std::string mode;
    double miou = 0.0;
    double dsc = 0.0;
    double delta_pnr = 0.0;
};

struct RunResult {
    std::filesystem::path run_dir;
    std::vector<FoldSummary> summaries;
};

// Full pipeline: synth/ingest -> patchify -> split -> per fold (train baseline,
// mine OoD, estimate, sample+combine, train med-ood, eval both), plus the
// selected ablation experiments. Writes every artifact under run_dir and a
// machine-readable run_index.json; refuses to reuse a non-empty run_dir.
RunResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& run_dir);

struct SweepRow {
    double pct = 0.0;
    std::size_t n_ood = 0;
    double pnr = 0.0;
    double miou = 0.0;
    double dsc = 0.0;
};

// One trained/evaluated row per pct value; pnr is computed on the materialized
// combined set.
std::vector<SweepRow> sweep_pnr(const DatasetManifest& d_id, const DatasetManifest& d_ood,
                                const DatasetManifest& test, const std::vector<double>& pcts,
                                const TrainConfig& train_config, std::uint64_t sample_seed);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

// Fixed per-class palette, stable across runs.
std::array<std::uint8_t, 3> class_color(int cls);  // cls in 1..6

// Side-by-side raster: input | ground truth coloring | prediction coloring.
ImageU8 render_overlay(const Patch& patch, const ClassMasks& pred, const ClassMasks& gt);

struct PerClassRow {
    std::string class_name;
    double baseline = 0.0;
    double med_ood = 0.0;
    std::optional<double> ood_only;
};

std::vector<PerClassRow> per_class_report(const SegModel& baseline, const SegModel& med_ood,
                                          const SegModel* ood_only, const DatasetManifest& test,
                                          double tau);
void write_per_class_csv(const std::filesystem::path& path, const std::vector<PerClassRow>& rows);

// Per-class patch-presence counts for a training set; used as a pipeline
// self-check that OoD sets contain no foreground.
std::vector<std::size_t> class_presence_counts(const DatasetManifest& manifest);

}  // namespace medood
