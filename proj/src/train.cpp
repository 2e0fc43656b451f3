#include "medood/train.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "medood/loss.hpp"
#include "medood/rng.hpp"

namespace medood {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'M', 'E', 'D', 'O', 'O', 'D', 'C', 'K'};
constexpr std::uint64_t kOrderSeedSalt = 0x9e3779b97f4a7c15ULL;

void patch_into_tensor(const Patch& patch, Tensor4<float>& x, int slot) {
    float* dst = x.sample(slot);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (int y = 0; y < patch.image.h; ++y)
        for (int px = 0; px < patch.image.w; ++px)
            for (int c = 0; c < 3; ++c)
                dst[c * plane + static_cast<std::size_t>(y) * x.w + px] =
                    patch.image.at(y, px, c) / 255.0f;
}

}  // namespace

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::Baseline: return "baseline";
        case TrainMode::MedOod: return "med_ood";
        case TrainMode::OodOnly: return "ood_only";
    }
    throw std::logic_error("unknown train mode");
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "baseline") return TrainMode::Baseline;
    if (s == "med_ood") return TrainMode::MedOod;
    if (s == "ood_only") return TrainMode::OodOnly;
    throw std::invalid_argument("unknown train mode: " + s);
}

void TrainConfig::validate() const {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
    if (dice_smooth <= 0.0) throw std::invalid_argument("dice_smooth must be positive");
    if (threshold_tau <= 0.0 || threshold_tau >= 1.0)
        throw std::invalid_argument("threshold_tau must be in (0,1)");
}

SegModel make_model(int num_classes, bool batchnorm, std::uint64_t seed) {
    if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
    return SegModel(num_classes, batchnorm, seed);
}

std::pair<SegModel, TrainHistory> train(const DatasetManifest& dataset, const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    const int num_classes = dataset.classes.count();
    const int h = dataset.patches.front().image.h;
    const int w = dataset.patches.front().image.w;
    for (const auto& p : dataset.patches) {
        if (p.image.h != h || p.image.w != w)
            throw std::invalid_argument("training requires uniform patch size, got " + p.id);
        if (config.mode == TrainMode::Baseline && p.role != PatchRole::ID)
            throw std::invalid_argument("baseline training admits only ID patches, got " + p.id);
        if (config.mode == TrainMode::OodOnly && p.role != PatchRole::OoD)
            throw std::invalid_argument("ood_only training admits only OoD patches, got " + p.id);
    }

    SegModel model = make_model(num_classes, config.batchnorm, config.seed);
    Adam<float> opt;
    opt.lr = config.learning_rate;
    Rng order_rng(config.seed ^ kOrderSeedSalt);

    TrainHistory history;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        int steps = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const int b = static_cast<int>(std::min<std::size_t>(config.batch_size, order.size() - start));
            Tensor4<float> x(b, 3, h, w);
            std::vector<ClassMasks> gts(b);
            std::vector<std::uint8_t> is_ood(b);
            for (int i = 0; i < b; ++i) {
                const Patch& p = dataset.patches[order[start + i]];
                patch_into_tensor(p, x, i);
                gts[i] = masks_from_labelmap(p.labelmap, num_classes);
                is_ood[i] = p.role == PatchRole::OoD ? 1 : 0;
            }
            Tensor4<float> probs = model.forward(x, true);
            Tensor4<float> dprobs;
            const double loss =
                seg_loss(probs, gts, is_ood, config.lambda, config.dice_smooth, &dprobs);
            if (!std::isfinite(loss))
                throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch));
            model.zero_grad();
            model.backward(dprobs);
            opt.step(model);
            loss_sum += loss;
            ++steps;
        }
        history.epoch_loss.push_back(loss_sum / steps);
    }
    model.drop_caches();
    return {std::move(model), std::move(history)};
}

ProbMaps predict(const SegModel& model, const Patch& patch) {
    Tensor4<float> x(1, 3, patch.image.h, patch.image.w);
    patch_into_tensor(patch, x, 0);
    Tensor4<float> out = model.infer(x);
    ProbMaps probs(model.num_classes, patch.image.h, patch.image.w);
    probs.d = std::move(out.d);
    return probs;
}

void save_checkpoint(const SegModel& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
    json params = json::array();
    json buffers = json::array();
    SegModel m = model;  // the visitors are non-const; a copy is cheap at this size
    m.for_each_param([&](const std::string& name, std::vector<float>& w, std::vector<float>&) {
        params.push_back({{"name", name}, {"size", w.size()}});
    });
    m.for_each_buffer([&](const std::string& name, std::vector<float>& w) {
        buffers.push_back({{"name", name}, {"size", w.size()}});
    });
    json header = {
        {"format_version", 1},
        {"num_classes", meta.num_classes},
        {"batchnorm", meta.batchnorm},
        {"init_seed", meta.init_seed},
        {"mode", meta.mode},
        {"lambda", meta.lambda},
        {"epochs", meta.epochs},
        {"train_seed", meta.train_seed},
        {"threshold_tau", meta.threshold_tau},
        {"params", params},
        {"buffers", buffers},
    };
    const std::string header_str = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t header_len = static_cast<std::uint32_t>(header_str.size());
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), header_str.size());
    m.for_each_param([&](const std::string&, std::vector<float>& w, std::vector<float>&) {
        out.write(reinterpret_cast<const char*>(w.data()), w.size() * sizeof(float));
    });
    m.for_each_buffer([&](const std::string&, std::vector<float>& w) {
        out.write(reinterpret_cast<const char*>(w.data()), w.size() * sizeof(float));
    });
    if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

std::pair<SegModel, CheckpointMeta> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path.string());
    std::uint32_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), header_len);
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path.string());
    const json header = json::parse(header_str);

    CheckpointMeta meta;
    meta.num_classes = header.at("num_classes").get<int>();
    meta.batchnorm = header.at("batchnorm").get<bool>();
    meta.init_seed = header.at("init_seed").get<std::uint64_t>();
    meta.mode = header.at("mode").get<std::string>();
    meta.lambda = header.at("lambda").get<double>();
    meta.epochs = header.at("epochs").get<int>();
    meta.train_seed = header.at("train_seed").get<std::uint64_t>();
    meta.threshold_tau = header.at("threshold_tau").get<double>();

    SegModel model(meta.num_classes, meta.batchnorm, meta.init_seed);
    std::size_t idx = 0;
    const json& params = header.at("params");
    model.for_each_param([&](const std::string& name, std::vector<float>& w, std::vector<float>&) {
        if (idx >= params.size() || params[idx].at("name") != name ||
            params[idx].at("size").get<std::size_t>() != w.size())
            throw std::runtime_error("checkpoint parameter mismatch at " + name);
        ++idx;
        in.read(reinterpret_cast<char*>(w.data()), w.size() * sizeof(float));
    });
    idx = 0;
    const json& buffers = header.at("buffers");
    model.for_each_buffer([&](const std::string& name, std::vector<float>& w) {
        if (idx >= buffers.size() || buffers[idx].at("name") != name ||
            buffers[idx].at("size").get<std::size_t>() != w.size())
            throw std::runtime_error("checkpoint buffer mismatch at " + name);
        ++idx;
        in.read(reinterpret_cast<char*>(w.data()), w.size() * sizeof(float));
    });
    if (!in) throw std::runtime_error("truncated checkpoint payload: " + path.string());
    return {std::move(model), std::move(meta)};
}

}  // namespace medood
