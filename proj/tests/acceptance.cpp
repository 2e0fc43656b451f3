// Release gate: each launch criterion prints exactly one PASS or FAIL line and
// the process exits with the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "medood/balance.hpp"
#include "medood/loss.hpp"
#include "medood/metrics.hpp"
#include "medood/ood.hpp"
#include "medood/pipeline.hpp"
#include "medood/rng.hpp"
#include "medood/synth.hpp"
#include "medood/train.hpp"
#include "test_support.hpp"

using namespace medood;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string strf(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return buf;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw Failure(msg);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

double median5(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Failure("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> relative_files(const fs::path& root) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file())
            files.push_back(fs::relative(entry.path(), root).generic_string());
    std::sort(files.begin(), files.end());
    return files;
}

// Small labeled set straight from the generator, every patch in one pool.
DatasetManifest synth_patches(const SynthConfig& synth, int patch_size) {
    DatasetManifest m;
    m.classes = synth_class_list(synth.num_classes);
    for (const auto& region : generate_synthetic(synth))
        for (auto& patch : patchify(region, patch_size)) m.patches.push_back(std::move(patch));
    return m;
}

// ---- A1: published-scale balance estimate ---------------------------------

std::string a1() {
    BalanceConfig cfg;
    const BalanceReport r = estimate_pct_opt(11217, 11600, 9684, cfg);
    require(std::abs(r.pct_opt - 0.6) < 1e-9, strf("pct_opt=%.3f, want 0.6", r.pct_opt));
    require(std::abs(r.pnr_combined - 0.644) < 1e-3,
            strf("pnr_combined=%.6f, want 0.644 +/- 0.001", r.pnr_combined));
    require(std::abs(r.delta_pnr - 0.006) < 1e-3,
            strf("delta_pnr=%.6f, want 0.006 +/- 0.001", r.delta_pnr));
    require(r.n_ood_selected == 5810, strf("n_ood_selected=%zu, want 5810", r.n_ood_selected));
    return strf("pct_opt=%.1f pnr=%.4f delta=%.4f n=%zu", r.pct_opt, r.pnr_combined, r.delta_pnr,
                r.n_ood_selected);
}

// ---- A2: estimator vs brute force, closed form vs materialized sets -------

std::string a2() {
    Rng rng(20260815);
    const ClassList classes = synth_class_list(2);
    int mixes = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t pos = static_cast<std::size_t>(rng.next_int(1, 120));
        const std::size_t neg = static_cast<std::size_t>(rng.next_int(1, 120));
        const std::size_t n_ood = static_cast<std::size_t>(rng.next_int(0, 150));
        BalanceConfig cfg;
        cfg.pnr_opt = rng.next_double(0.05, 1.6);

        const BalanceReport r = estimate_pct_opt(pos, neg, n_ood, cfg);
        double best_pct = cfg.theta.front();
        double best_obj = balance_objective(best_pct, pos, neg, n_ood, cfg.pnr_opt);
        for (double pct : cfg.theta) {
            const double obj = balance_objective(pct, pos, neg, n_ood, cfg.pnr_opt);
            if (obj < best_obj) {
                best_obj = obj;
                best_pct = pct;
            }
        }
        require(r.pct_opt == best_pct,
                strf("instance %d: pct_opt %.3f vs brute force %.3f", t, r.pct_opt, best_pct));
        require(std::abs(r.delta_pnr - best_obj) <= 1e-12,
                strf("instance %d: delta %.17g vs %.17g", t, r.delta_pnr, best_obj));

        const DatasetManifest d_id = testsup::counted_manifest(pos, neg, 0, classes);
        const DatasetManifest d_ood = testsup::counted_manifest(0, 0, n_ood, classes);
        for (double pct : {1.0, r.pct_opt, 0.37}) {
            const DatasetManifest sampled = sample_ood(d_ood, pct, 7 + t);
            require(sampled.size() == ood_sample_count(pct, n_ood), "sample size off");
            const DatasetManifest combined = combine_and_shuffle(sampled, d_id, 9 + t);
            const double closed =
                static_cast<double>(pos) / static_cast<double>(neg + sampled.size());
            require(compute_pnr(combined) == closed,
                    strf("instance %d pct %.2f: materialized pnr differs from closed form", t, pct));
            ++mixes;
        }
    }
    return strf("100 instances, %d materialized mixes", mixes);
}

// ---- A3: loss gradients vs central finite differences ----------------------

std::string a3() {
    Rng rng(31);
    double worst = 0.0;
    const double h_step = 1e-6;
    for (int t = 0; t < 20; ++t) {
        const int classes = rng.next_int(1, 3);
        const int n = 2, side = 4, hw = side * side;
        Tensor4<double> probs(n, classes, side, side);
        for (auto& v : probs.d) v = rng.next_double(0.05, 0.95);
        std::vector<std::uint8_t> is_ood = {0, 1};
        std::vector<ClassMasks> gts(n);
        for (int i = 0; i < n; ++i) {
            gts[i].assign(classes, BinaryMask(side, side, 0));
            if (!is_ood[i])
                for (int c = 0; c < classes; ++c)
                    for (auto& px : gts[i][c].d) px = rng.next_double() < 0.4 ? 1 : 0;
        }
        const double lambda = rng.next_double(0.25, 2.0);

        Tensor4<double> grad(n, classes, side, side);
        seg_loss(probs, gts, is_ood, lambda, 1.0, &grad);
        for (std::size_t k = 0; k < probs.d.size(); ++k) {
            const double orig = probs.d[k];
            probs.d[k] = orig + h_step;
            const double up = seg_loss<double>(probs, gts, is_ood, lambda, 1.0, nullptr);
            probs.d[k] = orig - h_step;
            const double dn = seg_loss<double>(probs, gts, is_ood, lambda, 1.0, nullptr);
            probs.d[k] = orig;
            worst = std::max(worst, rel_err(grad.d[k], (up - dn) / (2 * h_step)));
        }

        // Plain dice on one plane, with a real mask and with the implicit
        // all-zero mask.
        std::vector<double> pred(hw);
        for (auto& v : pred) v = rng.next_double(0.05, 0.95);
        const BinaryMask& mask = gts[0].front();
        for (const std::uint8_t* gt : {mask.d.data(), static_cast<const std::uint8_t*>(nullptr)}) {
            std::vector<double> dgrad(hw, 0.0);
            dice_loss_grad(pred.data(), gt, pred.size(), 1.0, 1.0, dgrad.data());
            for (std::size_t k = 0; k < pred.size(); ++k) {
                const double orig = pred[k];
                pred[k] = orig + h_step;
                const double up = dice_loss(pred.data(), gt, pred.size(), 1.0);
                pred[k] = orig - h_step;
                const double dn = dice_loss(pred.data(), gt, pred.size(), 1.0);
                pred[k] = orig;
                worst = std::max(worst, rel_err(dgrad[k], (up - dn) / (2 * h_step)));
            }
        }
    }
    require(worst < 1e-4, strf("max rel err %.3e >= 1e-4", worst));
    return strf("max rel err %.2e over 20 instances", worst);
}

// ---- A4: pruning keeps exactly the still-predicted candidates --------------

std::string a4() {
    const ClassList classes = synth_class_list(2);
    DatasetManifest cands;
    cands.classes = classes;
    const std::map<std::string, bool> fg = {{"c0", false}, {"c1", true}, {"c2", true},
                                            {"c3", false}, {"c4", true}, {"c5", false}};
    for (int i = 0; i < 6; ++i)
        cands.patches.push_back(testsup::tiny_patch("c" + std::to_string(i),
                                                    std::vector<std::uint8_t>(16, 0), 4,
                                                    PatchRole::OoD));

    PredictFn scripted = [&](const Patch& p) {
        ProbMaps m(2, p.labelmap.h, p.labelmap.w, 0.f);
        if (fg.at(p.id)) m.at(0, 0, 0) = 1.f;
        return m;
    };
    const auto [kept, scores] = prune_ood(scripted, cands, 0.5);
    require(kept.size() == 3, strf("kept %zu of 6, want 3", kept.size()));
    require(kept.patches[0].id == "c1" && kept.patches[1].id == "c2" &&
                kept.patches[2].id == "c4",
            "kept wrong candidates or wrong order");
    for (const auto& s : scores) {
        require(s.kept == (s.score < 1.0), "kept flag disagrees with score");
        require(s.score == (fg.at(s.patch_id) ? 0.5 : 1.0),
                strf("%s score %.3f", s.patch_id.c_str(), s.score));
    }

    PredictFn always_empty = [](const Patch& p) {
        return ProbMaps(2, p.labelmap.h, p.labelmap.w, 0.f);
    };
    const auto [none, empty_scores] = prune_ood(always_empty, cands, 0.5);
    require(none.empty(), strf("always-empty predictor kept %zu patches", none.size()));
    for (const auto& s : empty_scores) require(s.score == 1.0 && !s.kept, "stray keep");

    // Mining a real training pool leaves no foreground labels behind.
    SynthConfig synth;
    synth.region_count = 3;
    synth.region_min_size = 32;
    synth.region_max_size = 32;
    synth.num_classes = 2;
    synth.seed = 5;
    const DatasetManifest d_id = synth_patches(synth, 16);
    const SegModel model = make_model(2, true, 3);
    RemovalStrategy strategy;
    strategy.fallback_mean = dataset_background_mean(d_id);
    const auto [d_ood, mine_scores] = mine_ood(model, d_id, strategy, 0.5);
    require(mine_scores.size() == d_id.size(), "one score per candidate expected");
    for (const auto& p : d_ood.patches) {
        require(p.role == PatchRole::OoD, "mined patch kept ID role");
        for (auto v : p.labelmap.d) require(v == 0, "mined patch still carries foreground");
    }
    std::size_t want_kept = 0;
    for (const auto& s : mine_scores) want_kept += s.kept;
    require(d_ood.size() == want_kept, "kept set does not match scores");
    return strf("scripted 3/6 kept, empty predictor 0/6, mined %zu/%zu all label-free",
                d_ood.size(), d_id.size());
}

// ---- A5: spurious-cue study, 5 seeds --------------------------------------

std::string a5() {
    std::vector<double> fp_base, fp_med, miou_base, miou_med;
    for (std::uint64_t seed : {101ull, 202ull, 303ull, 404ull, 505ull}) {
        testsup::TempDir tmp;
        PipelineConfig cfg;
        cfg.synth.region_count = 8;
        cfg.synth.region_min_size = 64;
        cfg.synth.region_max_size = 80;
        cfg.synth.num_classes = 2;
        cfg.synth.spurious_rate = 0.3;
        cfg.patch_size = 32;
        cfg.k_folds = 2;
        cfg.train.epochs = 12;
        cfg.seed = seed;
        const RunResult result = run_pipeline(cfg, tmp.path / "run");

        const DatasetManifest dataset = load_manifest(tmp.path / "run" / "dataset");
        double fb = 0.0, fm = 0.0, mb = 0.0, mm = 0.0;
        for (int fold = 0; fold < 2; ++fold) {
            const DatasetManifest test = dataset.fold_subset(fold);
            const fs::path fold_dir = tmp.path / "run" / ("fold_" + std::to_string(fold));
            fb += foreground_fp_rate(load_checkpoint(fold_dir / "baseline.ckpt").first, test, 0.5);
            fm += foreground_fp_rate(load_checkpoint(fold_dir / "med_ood.ckpt").first, test, 0.5);
        }
        for (const auto& s : result.summaries) {
            if (s.mode == "baseline") mb += s.miou;
            if (s.mode == "med_ood") mm += s.miou;
        }
        fp_base.push_back(fb / 2);
        fp_med.push_back(fm / 2);
        miou_base.push_back(mb / 2);
        miou_med.push_back(mm / 2);
    }
    const double fpb = median5(fp_base), fpm = median5(fp_med);
    const double mb = median5(miou_base), mm = median5(miou_med);
    require(fpm < fpb, strf("median fp rate %.4f !< baseline %.4f", fpm, fpb));
    require(mm >= mb, strf("median miou %.4f < baseline %.4f", mm, mb));
    return strf("fp %.4f -> %.4f, miou %.4f -> %.4f", fpb, fpm, mb, mm);
}

// ---- A6: background-only training on a class-skewed set --------------------

std::string a6() {
    SynthConfig synth;
    synth.region_count = 8;
    synth.region_min_size = 64;
    synth.region_max_size = 80;
    synth.num_classes = 3;
    synth.class_density = {0.14, 0.12, 0.01};
    // Class 3 also appears as unlabeled background clutter, so no amount of
    // training separates it: the class stays at the predict-empty plateau.
    synth.spurious_rate = 0.15;
    synth.confuser_class = 3;
    synth.seed = 97;
    DatasetManifest all;
    all.classes = synth_class_list(3);
    const auto regions = generate_synthetic(synth);
    const auto folds = split_folds(regions, 2, 11);
    for (const auto& region : regions)
        for (auto& patch : patchify(region, 32)) {
            patch.fold = folds.at(region.id);
            all.patches.push_back(std::move(patch));
        }
    const DatasetManifest test = all.fold_subset(0);
    const DatasetManifest d_id = all.fold_subset(0, true);

    TrainConfig tc;
    tc.mode = TrainMode::Baseline;
    tc.epochs = 300;
    tc.learning_rate = 3e-3;
    tc.seed = 1;
    const SegModel baseline = train(d_id, tc).first;

    RemovalStrategy strategy;
    strategy.fallback_mean = dataset_background_mean(d_id);
    DatasetManifest d_ood;
    d_ood.classes = d_id.classes;
    for (const auto& patch : d_id.patches)
        d_ood.patches.push_back(remove_foreground(patch, strategy));
    require(!d_ood.empty(), "no ood patches to train on");

    TrainConfig oc = tc;
    oc.mode = TrainMode::OodOnly;
    oc.epochs = 120;
    oc.learning_rate = 3e-3;
    oc.seed = 2;
    const SegModel ood_model = train(d_ood, oc).first;

    const double oracle = empty_predictor_miou(test);
    const double ood_miou = evaluate_model(ood_model, test, 0.5).first.miou;
    require(ood_miou >= oracle - 0.02,
            strf("ood-only miou %.4f below empty oracle %.4f - 0.02", ood_miou, oracle));

    const auto rows = per_class_report(baseline, ood_model, nullptr, test, 0.5);
    const double rare_gap = std::abs(rows[2].med_ood - rows[2].baseline);
    require(rare_gap <= 0.05,
            strf("rare class should tie baseline, |gap|=%.4f (%.4f vs %.4f)", rare_gap,
                 rows[2].med_ood, rows[2].baseline));
    for (int c : {0, 1})
        require(rows[c].med_ood < rows[c].baseline - 0.05,
                strf("common class %d should fall below baseline (%.4f vs %.4f)", c + 1,
                     rows[c].med_ood, rows[c].baseline));
    return strf("ood miou %.3f vs oracle %.3f, rare gap %.3f, common drops %.3f/%.3f", ood_miou,
                oracle, rare_gap, rows[0].baseline - rows[0].med_ood,
                rows[1].baseline - rows[1].med_ood);
}

// ---- A7: worked metric and balance examples --------------------------------

std::string a7() {
    // Empty-vs-empty convention.
    const BinaryMask none(10, 10, 0);
    require(class_iou(none, none) == 1.0, "empty iou");
    require(class_dice(none, none) == 1.0, "empty dice");

    // Two 100-pixel masks overlapping on 50 pixels.
    BinaryMask a(15, 20, 0), b(15, 20, 0);
    for (int i = 0; i < 100; ++i) a.d[i] = 1;
    for (int i = 50; i < 150; ++i) b.d[i] = 1;
    const double iou = class_iou(a, b);
    const double dsc = class_dice(a, b);
    require(iou == 50.0 / 150.0, "overlap iou");
    require(dsc == 0.5, "overlap dice");
    require(std::abs(dsc - 2 * iou / (1 + iou)) < 1e-12, "iou/dice identity");

    // Six classes: four perfectly absent, two fully wrong.
    ClassMasks pred(6, BinaryMask(2, 2, 0)), gt(6, BinaryMask(2, 2, 0));
    pred[4].d[0] = 1;
    gt[4].d[3] = 1;  // disjoint
    pred[5].d[1] = 1;  // predicted, absent
    require(patch_miou(pred, gt) == 4.0 / 6.0, "miou worked example");

    // Same patch but the last class one-third right.
    pred[4] = gt[4];
    pred[5] = BinaryMask(2, 2, 0);
    gt[5].d[0] = 1;
    gt[5].d[1] = 1;
    pred[5].d[1] = 1;
    pred[5].d[2] = 1;  // inter 1, union 3
    require(patch_miou(pred, gt) == (5.0 + 1.0 / 3.0) / 6.0, "partial miou worked example");

    // Redundancy score of a candidate the model still fires one class on.
    const Patch zero = testsup::tiny_patch("z", std::vector<std::uint8_t>(16, 0), 4,
                                           PatchRole::OoD);
    PredictFn one_class = [](const Patch& p) {
        ProbMaps m(6, p.labelmap.h, p.labelmap.w, 0.f);
        m.at(2, 1, 1) = 1.f;
        return m;
    };
    const OodScore s = score_ood(one_class, zero, 0.5, 6);
    require(s.score == 5.0 / 6.0 && s.kept, "redundancy score worked example");

    // Dice of an all-on 4-pixel prediction against the implicit empty mask.
    const std::vector<double> ones(4, 1.0);
    require(dice_loss<double>(ones.data(), nullptr, 4, 1.0) == 0.8, "dice worked example");

    // Balance arithmetic at 65 positives / 40 negatives / 100 candidates.
    require(balance_objective(0.6, 65, 40, 100, 0.65) == 0.0, "objective at 0.6");
    require(balance_objective(0.0, 65, 40, 100, 0.65) == 0.975, "objective at 0");
    require(std::abs(balance_objective(1.0, 65, 40, 100, 0.65) - 0.185714285714285714) < 1e-12,
            "objective at 1");
    BalanceConfig cfg;
    const BalanceReport r = estimate_pct_opt(65, 40, 100, cfg);
    require(std::abs(r.pct_opt - 0.6) < 1e-9 && r.delta_pnr == 0.0 && r.pnr_id == 1.625,
            "balance worked example");

    // Selection counts.
    require(ood_sample_count(0.6, 100) == 60, "count 0.6 of 100");
    require(ood_sample_count(0.6, 9684) == 5810, "count 0.6 of 9684");
    require(ood_sample_count(1.0, 123) == 123 && ood_sample_count(0.0, 123) == 0, "count edges");
    require(ood_sample_count(0.35, 10) == 3, "count floors");

    // Tiling: 300x200 region at patch 128 -> 2x3 grid with padded border.
    LabeledRegion region;
    region.id = "r";
    region.image = ImageU8(200, 300, 3, 10);
    region.labelmap = LabelMap(200, 300, 0);
    const auto patches = patchify(region, 128);
    require(patches.size() == 6, "patch count 300x200");
    require(patches.front().pad_rows == 0 && patches.front().pad_cols == 0, "interior pad");
    require(patches.back().pad_rows == 56 && patches.back().pad_cols == 84, "border pad");
    region.image = ImageU8(917, 1016, 3, 10);
    region.labelmap = LabelMap(917, 1016, 0);
    require(patchify(region, 128).size() == 64, "patch count 1016x917");

    // Ten regions dealt into three folds -> sizes {4,3,3}.
    std::vector<LabeledRegion> ten(10);
    for (int i = 0; i < 10; ++i) {
        ten[i].id = "r" + std::to_string(i);
        ten[i].image = ImageU8(8, 8, 3);
        ten[i].labelmap = LabelMap(8, 8);
    }
    std::vector<int> sizes(3, 0);
    for (const auto& [id, fold] : split_folds(ten, 3, 4)) sizes.at(fold)++;
    std::sort(sizes.begin(), sizes.end());
    require(sizes == std::vector<int>{3, 3, 4}, "fold sizes");

    // Combined loss worked example: engineered per-plane dice of
    // 0.4/0.2 (labeled sample) and 0.1/0.3 (background-only sample) -> 0.5.
    Tensor4<double> probs(2, 2, 2, 2);
    std::fill(probs.d.begin(), probs.d.end(), 0.0);
    std::vector<ClassMasks> gts(2, ClassMasks(2, BinaryMask(2, 2, 0)));
    gts[0][0].d[0] = 1;
    gts[0][1].d[0] = 1;
    probs.at(0, 0, 0, 0) = 1.0 / 7.0;  // dice 0.4
    probs.at(0, 1, 0, 0) = 0.5;        // dice 0.2
    probs.at(1, 0, 0, 0) = 1.0 / 9.0;  // dice 0.1 vs empty
    probs.at(1, 1, 0, 0) = 3.0 / 7.0;  // dice 0.3 vs empty
    const std::vector<std::uint8_t> is_ood = {0, 1};
    const double loss = seg_loss<double>(probs, gts, is_ood, 1.0, 1.0, nullptr);
    require(std::abs(loss - 0.5) < 1e-12, strf("combined loss %.17g, want 0.5", loss));

    return "worked examples hold";
}

// ---- A8: byte-identical reruns ---------------------------------------------

std::string a8() {
    testsup::TempDir tmp;
    PipelineConfig cfg;
    cfg.synth.region_count = 6;
    cfg.synth.region_min_size = 48;
    cfg.synth.region_max_size = 64;
    cfg.synth.num_classes = 2;
    cfg.patch_size = 16;
    cfg.k_folds = 2;
    cfg.train.epochs = 2;
    cfg.seed = 77;
    run_pipeline(cfg, tmp.path / "a");
    run_pipeline(cfg, tmp.path / "b");

    const auto files = relative_files(tmp.path / "a");
    require(files == relative_files(tmp.path / "b"), "file sets differ");
    for (const auto& rel : files)
        require(slurp(tmp.path / "a" / rel) == slurp(tmp.path / "b" / rel),
                "bytes differ: " + rel);
    return strf("%zu files byte-identical across reruns", files.size());
}

// ---- A9: adding OoD data lowers the ratio monotonically --------------------

std::string a9() {
    const ClassList classes = synth_class_list(2);
    const DatasetManifest d_id = testsup::counted_manifest(11217, 11600, 0, classes);
    const DatasetManifest d_ood = testsup::counted_manifest(0, 0, 9684, classes);
    const std::vector<double> pcts = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4};
    std::vector<double> pnrs;
    for (std::size_t i = 0; i < pcts.size(); ++i) {
        const DatasetManifest sampled = sample_ood(d_ood, pcts[i], 3);
        require(sampled.size() == ood_sample_count(pcts[i], d_ood.size()), "sample size");
        pnrs.push_back(compute_pnr(combine_and_shuffle(sampled, d_id, 4 + i)));
    }
    for (std::size_t i = 1; i < pnrs.size(); ++i)
        require(pnrs[i] > pnrs[i - 1],
                strf("pnr not strictly increasing at pct %.1f", pcts[i]));
    require(std::abs(pnrs.front() - 0.527) < 1e-3,
            strf("pnr at pct 1.0 = %.6f, want 0.527 +/- 0.001", pnrs.front()));
    require(std::abs(pnrs.back() - 0.725) < 1e-3,
            strf("pnr at pct 0.4 = %.6f, want 0.725 +/- 0.001", pnrs.back()));

    // Same shape out of the real sweep stage on a small trained set.
    SynthConfig synth;
    synth.region_count = 3;
    synth.region_min_size = 32;
    synth.region_max_size = 32;
    synth.num_classes = 2;
    synth.seed = 21;
    const DatasetManifest id_small = synth_patches(synth, 16);
    RemovalStrategy strategy;
    strategy.kind = RemovalKind::ZeroFill;
    DatasetManifest ood_small;
    ood_small.classes = id_small.classes;
    for (const auto& p : id_small.patches)
        ood_small.patches.push_back(remove_foreground(p, strategy));
    require(ood_small.size() >= 10, "need at least 10 candidates for 0.1 steps");
    synth.seed = 22;
    synth.region_count = 1;
    const DatasetManifest test = synth_patches(synth, 16);

    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 5;
    const auto rows = sweep_pnr(id_small, ood_small, test, pcts, tc, 77);
    require(rows.size() == pcts.size(), "sweep row count");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].n_ood == ood_sample_count(pcts[i], ood_small.size()), "sweep n_ood");
        if (i > 0)
            require(rows[i].pnr > rows[i - 1].pnr, "sweep pnr not strictly increasing");
    }
    return strf("pnr %.4f -> %.4f over pct 1.0 -> 0.4, sweep agrees", pnrs.front(), pnrs.back());
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        std::string (*fn)();
        double budget_s;  // 0 = report only
    };
    const Entry entries[] = {
        {"A1", a1, 1.0},   {"A2", a2, 5.0},   {"A3", a3, 10.0},
        {"A4", a4, 5.0},   {"A5", a5, 900.0}, {"A6", a6, 300.0},
        {"A7", a7, 1.0},   {"A8", a8, 0.0},   {"A9", a9, 0.0},
    };
    int failures = 0;
    for (const auto& e : entries) {
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = true;
        std::string detail;
        try {
            detail = e.fn();
        } catch (const std::exception& ex) {
            ok = false;
            detail = ex.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (ok && e.budget_s > 0.0 && secs > e.budget_s) {
            ok = false;
            detail = strf("over budget: %.1fs > %.0fs", secs, e.budget_s);
        }
        std::printf("%s %s (%s; %.1fs)\n", e.name, ok ? "PASS" : "FAIL", detail.c_str(), secs);
        std::fflush(stdout);
        failures += !ok;
    }
    return failures;
}
