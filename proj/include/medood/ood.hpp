#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "medood/dataset.hpp"

namespace medood {

enum class RemovalKind { ZeroFill, MeanFill, NearestInpaint };

std::string to_string(RemovalKind kind);
RemovalKind removal_kind_from_string(const std::string& s);

struct RemovalStrategy {
    RemovalKind kind = RemovalKind::NearestInpaint;
    // Used by mean_fill (and the nearest_inpaint fallback) when a patch has no
    // non-foreground pixels at all; typically the dataset-wide background mean.
    std::array<double, 3> fallback_mean = {128.0, 128.0, 128.0};
};

// Per-channel mean intensity over labelmap-0 pixels of the whole manifest.
std::array<double, 3> dataset_background_mean(const DatasetManifest& manifest);

// Replaces every foreground pixel per the strategy, zeroes the labelmap, sets
// role OoD and appends "_ood" to the id; provenance fields carry over.
Patch remove_foreground(const Patch& patch, const RemovalStrategy& strategy);

// Anything that maps a patch to per-class probability maps; the trained
// segmentation model is the production implementation, tests may stub it.
using PredictFn = std::function<ProbMaps(const Patch&)>;

struct OodScore {
    std::string patch_id;
    double score = 0.0;  // patch_miou of the thresholded prediction vs the all-empty GT
    bool kept = false;   // score < 1.0
};

OodScore score_ood(const PredictFn& predict, const Patch& patch, double tau, int num_classes);

// Keeps exactly the candidates the model still predicts foreground on
// (score < 1.0), in input order; a perfect-empty prediction marks redundancy.
std::pair<DatasetManifest, std::vector<OodScore>> prune_ood(const PredictFn& predict,
                                                            const DatasetManifest& unfiltered,
                                                            double tau);

}  // namespace medood
