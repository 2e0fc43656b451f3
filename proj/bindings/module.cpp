#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "medood/loss.hpp"
#include "medood/pipeline.hpp"

namespace py = pybind11;
using namespace medood;

namespace {

BinaryMask mask_from_array(const py::array_t<std::uint8_t>& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("mask must be a 2D uint8 array");
    BinaryMask mask(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    auto view = arr.unchecked<2>();
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) mask.at(y, x) = view(y, x) ? 1 : 0;
    return mask;
}

py::dict report_to_dict(const BalanceReport& r) {
    py::dict d;
    d["pos_count"] = r.pos_count;
    d["neg_count"] = r.neg_count;
    d["pnr_id"] = r.pnr_id;
    d["pnr_opt"] = r.pnr_opt;
    d["pct_opt"] = r.pct_opt;
    d["pnr_combined"] = r.pnr_combined;
    d["delta_pnr"] = r.delta_pnr;
    d["n_ood_total"] = r.n_ood_total;
    d["n_ood_selected"] = r.n_ood_selected;
    d["objective_curve"] = r.objective_curve;
    return d;
}

BalanceConfig balance_config(double pnr_opt, const std::vector<double>& grid) {
    BalanceConfig cfg;
    cfg.pnr_opt = pnr_opt;
    if (!grid.empty()) cfg.theta = grid;
    return cfg;
}

DatasetManifest load_subset(const std::string& dir, int fold, bool invert) {
    DatasetManifest manifest = load_manifest(dir);
    if (fold < 0) return manifest;
    return manifest.fold_subset(fold, invert);
}

TrainConfig train_config(const std::string& mode, int epochs, int batch_size, double lr,
                         double lam, double smooth, double tau, bool batchnorm,
                         std::uint64_t seed) {
    TrainConfig cfg;
    cfg.mode = train_mode_from_string(mode);
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.learning_rate = lr;
    cfg.lambda = lam;
    cfg.dice_smooth = smooth;
    cfg.threshold_tau = tau;
    cfg.batchnorm = batchnorm;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "OoD patch mining and balanced training for patch segmentation";

    m.def(
        "synth",
        [](const std::string& out, int regions, int region_min, int region_max, int classes,
           const std::vector<double>& density, double spurious_rate, int confuser_class,
           std::uint64_t seed) {
            SynthConfig cfg;
            cfg.region_count = regions;
            cfg.region_min_size = region_min;
            cfg.region_max_size = region_max;
            cfg.num_classes = classes;
            cfg.class_density = density;
            cfg.spurious_rate = spurious_rate;
            cfg.confuser_class = confuser_class;
            cfg.seed = seed;
            DatasetManifest manifest;
            manifest.classes = synth_class_list(classes);
            for (const auto& region : generate_synthetic(cfg)) {
                Patch p;
                p.id = region.id;
                p.region_id = region.id;
                p.image = region.image;
                p.labelmap = region.labelmap;
                manifest.patches.push_back(std::move(p));
            }
            save_manifest(manifest, out);
            return manifest.size();
        },
        py::arg("out"), py::arg("regions") = 12, py::arg("region_min") = 96,
        py::arg("region_max") = 128, py::arg("classes") = 3,
        py::arg("density") = std::vector<double>{}, py::arg("spurious_rate") = 0.0,
        py::arg("confuser_class") = 1, py::arg("seed") = 0,
        "Generate a synthetic region set and save it as a dataset directory");

    m.def(
        "patchify",
        [](const std::string& in, const std::string& out, int patch_size) {
            const DatasetManifest src = load_manifest(in);
            DatasetManifest dst;
            dst.classes = src.classes;
            for (const auto& entry : src.patches) {
                LabeledRegion region{entry.id, entry.image, entry.labelmap};
                for (auto& tile : patchify(region, patch_size)) {
                    tile.fold = entry.fold;
                    dst.patches.push_back(std::move(tile));
                }
            }
            save_manifest(dst, out);
            return dst.size();
        },
        py::arg("in"), py::arg("out"), py::arg("patch_size") = 32,
        "Tile every entry of a dataset into fixed-size patches");

    m.def(
        "split",
        [](const std::string& in, const std::string& out, int k, std::uint64_t seed) {
            DatasetManifest manifest = load_manifest(in);
            split_manifest_folds(manifest, k, seed);
            save_manifest(manifest, out);
            return manifest.size();
        },
        py::arg("in"), py::arg("out"), py::arg("k") = 3, py::arg("seed") = 0,
        "Assign cross-validation folds by region");

    m.def(
        "train",
        [](const std::string& data, const std::string& ckpt, const std::string& mode, int epochs,
           int batch_size, double lr, double lam, double smooth, double tau, bool batchnorm,
           std::uint64_t seed, int fold, bool invert) {
            const TrainConfig cfg =
                train_config(mode, epochs, batch_size, lr, lam, smooth, tau, batchnorm, seed);
            const DatasetManifest manifest = load_subset(data, fold, invert);
            auto [model, history] = train(manifest, cfg);
            CheckpointMeta meta;
            meta.num_classes = manifest.classes.count();
            meta.batchnorm = batchnorm;
            meta.init_seed = seed;
            meta.mode = mode;
            meta.lambda = lam;
            meta.epochs = epochs;
            meta.train_seed = seed;
            meta.threshold_tau = tau;
            save_checkpoint(model, meta, ckpt);
            return history.epoch_loss;
        },
        py::arg("data"), py::arg("ckpt"), py::arg("mode") = "baseline", py::arg("epochs") = 10,
        py::arg("batch_size") = 16, py::arg("lr") = 1e-3, py::arg("lam") = 1.0,
        py::arg("smooth") = 1.0, py::arg("tau") = 0.5, py::arg("batchnorm") = true,
        py::arg("seed") = 0, py::arg("fold") = -1, py::arg("invert") = false,
        "Train a model on a dataset directory; returns per-epoch mean loss");

    m.def(
        "mine_ood",
        [](const std::string& data, const std::string& ckpt, const std::string& out,
           const std::string& removal, double tau, int fold, bool invert) {
            const DatasetManifest d_id = load_subset(data, fold, invert);
            const SegModel model = load_checkpoint(ckpt).first;
            RemovalStrategy strategy;
            strategy.kind = removal_kind_from_string(removal);
            strategy.fallback_mean = dataset_background_mean(d_id);
            auto [d_ood, scores] = mine_ood(model, d_id, strategy, tau);
            save_manifest(d_ood, out);
            return py::make_tuple(d_ood.size(), scores.size());
        },
        py::arg("data"), py::arg("ckpt"), py::arg("out"), py::arg("removal") = "nearest_inpaint",
        py::arg("tau") = 0.5, py::arg("fold") = -1, py::arg("invert") = false,
        "Mine OoD candidates and prune the redundant ones; returns (kept, total)");

    m.def(
        "estimate",
        [](std::size_t pos, std::size_t neg, std::size_t n_ood, double pnr_opt,
           const std::vector<double>& grid) {
            return report_to_dict(estimate_pct_opt(pos, neg, n_ood, balance_config(pnr_opt, grid)));
        },
        py::arg("pos"), py::arg("neg"), py::arg("n_ood"), py::arg("pnr_opt") = 0.65,
        py::arg("grid") = std::vector<double>{},
        "Estimate the optimal OoD percentage from sample counts");

    m.def(
        "estimate_dirs",
        [](const std::string& id_dir, const std::string& ood_dir, double pnr_opt,
           const std::vector<double>& grid) {
            return report_to_dict(estimate_pct_opt(load_manifest(ood_dir), load_manifest(id_dir),
                                                   balance_config(pnr_opt, grid)));
        },
        py::arg("id_dir"), py::arg("ood_dir"), py::arg("pnr_opt") = 0.65,
        py::arg("grid") = std::vector<double>{},
        "Estimate the optimal OoD percentage from dataset directories");

    m.def(
        "combine",
        [](const std::string& id_dir, const std::string& ood_dir, double pct, std::uint64_t seed,
           const std::string& out) {
            const DatasetManifest sampled = sample_ood(load_manifest(ood_dir), pct, seed);
            const DatasetManifest combined =
                combine_and_shuffle(sampled, load_manifest(id_dir), seed + 1);
            save_manifest(combined, out);
            return py::make_tuple(combined.size(), compute_pnr(combined));
        },
        py::arg("id_dir"), py::arg("ood_dir"), py::arg("pct"), py::arg("seed"), py::arg("out"),
        "Sample an OoD subset, merge, shuffle and save; returns (size, pnr)");

    m.def(
        "evaluate",
        [](const std::string& data, const std::string& ckpt, double tau, int fold, bool invert) {
            const DatasetManifest test = load_subset(data, fold, invert);
            const SegModel model = load_checkpoint(ckpt).first;
            const MetricsReport report = evaluate_model(model, test, tau).first;
            py::dict d;
            d["miou"] = report.miou;
            d["dsc"] = report.dsc;
            d["fp_rate"] = foreground_fp_rate(model, test, tau);
            d["patches"] = report.patch_count;
            d["per_class_iou"] = report.per_class_iou;
            return d;
        },
        py::arg("data"), py::arg("ckpt"), py::arg("tau") = 0.5, py::arg("fold") = -1,
        py::arg("invert") = false, "Evaluate a checkpoint on a dataset directory");

    m.def(
        "run",
        [](const std::string& out, std::uint64_t seed, int regions, int classes,
           double spurious_rate, int patch_size, int k_folds, int epochs, double pnr_opt,
           const std::string& removal, bool ood_only, bool bn_ablation, bool sweep) {
            PipelineConfig cfg;
            cfg.seed = seed;
            cfg.synth.region_count = regions;
            cfg.synth.num_classes = classes;
            cfg.synth.spurious_rate = spurious_rate;
            cfg.patch_size = patch_size;
            cfg.k_folds = k_folds;
            cfg.train.epochs = epochs;
            cfg.balance.pnr_opt = pnr_opt;
            cfg.removal = removal_kind_from_string(removal);
            cfg.experiment_ood_only = ood_only;
            cfg.experiment_bn_ablation = bn_ablation;
            cfg.experiment_sweep = sweep;
            const RunResult result = run_pipeline(cfg, out);
            py::list rows;
            for (const auto& s : result.summaries) {
                py::dict d;
                d["fold"] = s.fold;
                d["mode"] = s.mode;
                d["miou"] = s.miou;
                d["dsc"] = s.dsc;
                d["delta_pnr"] = s.delta_pnr;
                rows.append(d);
            }
            return rows;
        },
        py::arg("out"), py::arg("seed"), py::arg("regions") = 12, py::arg("classes") = 3,
        py::arg("spurious_rate") = 0.0, py::arg("patch_size") = 32, py::arg("k_folds") = 3,
        py::arg("epochs") = 10, py::arg("pnr_opt") = 0.65,
        py::arg("removal") = "nearest_inpaint", py::arg("ood_only") = false,
        py::arg("bn_ablation") = false, py::arg("sweep") = false,
        "Run the full synthetic pipeline; returns the per-fold summary rows");

    m.def(
        "class_iou",
        [](const py::array_t<std::uint8_t>& pred, const py::array_t<std::uint8_t>& gt) {
            return class_iou(mask_from_array(pred), mask_from_array(gt));
        },
        py::arg("pred"), py::arg("gt"), "IoU of two binary masks (both empty -> 1.0)");

    m.def(
        "class_dice",
        [](const py::array_t<std::uint8_t>& pred, const py::array_t<std::uint8_t>& gt) {
            return class_dice(mask_from_array(pred), mask_from_array(gt));
        },
        py::arg("pred"), py::arg("gt"), "Dice of two binary masks (both empty -> 1.0)");

    m.def(
        "dice_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
           const py::object& gt, double smooth) {
            const std::uint8_t* g = nullptr;
            py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> garr;
            if (!gt.is_none()) {
                garr = py::cast<decltype(garr)>(gt);
                if (garr.size() != pred.size()) throw std::invalid_argument("pred/gt size mismatch");
                g = garr.data();
            }
            return dice_loss(pred.data(), g, static_cast<std::size_t>(pred.size()), smooth);
        },
        py::arg("pred"), py::arg("gt") = py::none(), py::arg("smooth") = 1.0,
        "Smoothed Dice loss; gt=None means the all-zero mask");

    m.def("ood_sample_count", &ood_sample_count, py::arg("pct"), py::arg("n_ood"),
          "floor(pct * n_ood) with a representation-safe epsilon");
}
