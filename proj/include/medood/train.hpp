#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "medood/dataset.hpp"
#include "medood/net.hpp"

namespace medood {

enum class TrainMode { Baseline, MedOod, OodOnly };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
    TrainMode mode = TrainMode::Baseline;
    double lambda = 1.0;
    int epochs = 10;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double dice_smooth = 1.0;
    double threshold_tau = 0.5;
    bool batchnorm = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> epoch_loss;       // mean step loss per epoch
    std::string checkpoint_path;          // set once the model is saved
};

using SegModel = SegNet<float>;

SegModel make_model(int num_classes, bool batchnorm, std::uint64_t seed);

// Gradient descent on the segmentation loss with seeded batch order.
// Baseline expects only ID patches, ood_only expects only OoD patches,
// med_ood takes the combined shuffled set. Aborts on non-finite loss.
std::pair<SegModel, TrainHistory> train(const DatasetManifest& dataset, const TrainConfig& config);

// Deterministic inference: |C| probability maps for one patch.
ProbMaps predict(const SegModel& model, const Patch& patch);

// Checkpoint container: magic + JSON header (architecture, seed and training
// provenance) + raw little-endian float32 parameter/buffer arrays.
struct CheckpointMeta {
    int num_classes = 0;
    bool batchnorm = true;
    std::uint64_t init_seed = 0;
    std::string mode;  // training provenance, informational
    double lambda = 1.0;
    int epochs = 0;
    std::uint64_t train_seed = 0;
    double threshold_tau = 0.5;
};

void save_checkpoint(const SegModel& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
std::pair<SegModel, CheckpointMeta> load_checkpoint(const std::filesystem::path& path);

}  // namespace medood
