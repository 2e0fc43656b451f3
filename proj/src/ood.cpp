#include "medood/ood.hpp"

#include <cmath>
#include <stdexcept>

#include "medood/metrics.hpp"

namespace medood {

std::string to_string(RemovalKind kind) {
    switch (kind) {
        case RemovalKind::ZeroFill: return "zero_fill";
        case RemovalKind::MeanFill: return "mean_fill";
        case RemovalKind::NearestInpaint: return "nearest_inpaint";
    }
    throw std::logic_error("unknown removal kind");
}

RemovalKind removal_kind_from_string(const std::string& s) {
    if (s == "zero_fill") return RemovalKind::ZeroFill;
    if (s == "mean_fill") return RemovalKind::MeanFill;
    if (s == "nearest_inpaint") return RemovalKind::NearestInpaint;
    throw std::invalid_argument("unknown removal kind: " + s);
}

std::array<double, 3> dataset_background_mean(const DatasetManifest& manifest) {
    std::array<double, 3> sum = {0.0, 0.0, 0.0};
    std::size_t count = 0;
    for (const auto& p : manifest.patches) {
        for (int y = 0; y < p.image.h; ++y) {
            for (int x = 0; x < p.image.w; ++x) {
                if (p.labelmap.at(y, x) != 0) continue;
                for (int c = 0; c < 3; ++c) sum[c] += p.image.at(y, x, c);
                ++count;
            }
        }
    }
    if (count == 0) throw std::invalid_argument("manifest has no background pixels");
    for (int c = 0; c < 3; ++c) sum[c] /= static_cast<double>(count);
    return sum;
}

namespace {

std::uint8_t round_u8(double v) {
    const long r = std::lround(v);
    return static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
}

void fill_constant(Patch& out, const std::array<double, 3>& value) {
    for (int y = 0; y < out.image.h; ++y)
        for (int x = 0; x < out.image.w; ++x)
            if (out.labelmap.at(y, x) != 0)
                for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = round_u8(value[c]);
}

void fill_mean(Patch& out, const RemovalStrategy& strategy) {
    std::array<double, 3> sum = {0.0, 0.0, 0.0};
    std::size_t count = 0;
    for (int y = 0; y < out.image.h; ++y) {
        for (int x = 0; x < out.image.w; ++x) {
            if (out.labelmap.at(y, x) != 0) continue;
            for (int c = 0; c < 3; ++c) sum[c] += out.image.at(y, x, c);
            ++count;
        }
    }
    if (count == 0) {
        fill_constant(out, strategy.fallback_mean);
        return;
    }
    for (int c = 0; c < 3; ++c) sum[c] /= static_cast<double>(count);
    fill_constant(out, sum);
}

// Every foreground pixel takes the value of its nearest background pixel by
// Euclidean distance; ties go to the background pixel earliest in row-major
// order. Brute force: patches are small, and the scan order makes the
// tie-break exact with no extra bookkeeping.
void fill_nearest(Patch& out, const RemovalStrategy& strategy) {
    struct Pt {
        int y, x;
    };
    std::vector<Pt> background;
    for (int y = 0; y < out.image.h; ++y)
        for (int x = 0; x < out.image.w; ++x)
            if (out.labelmap.at(y, x) == 0) background.push_back({y, x});
    if (background.empty()) {
        fill_constant(out, strategy.fallback_mean);
        return;
    }
    const ImageU8 src = out.image;
    for (int y = 0; y < out.image.h; ++y) {
        for (int x = 0; x < out.image.w; ++x) {
            if (out.labelmap.at(y, x) == 0) continue;
            long best_d2 = -1;
            Pt best{0, 0};
            for (const Pt& b : background) {
                const long dy = b.y - y, dx = b.x - x;
                const long d2 = dy * dy + dx * dx;
                if (best_d2 < 0 || d2 < best_d2) {
                    best_d2 = d2;
                    best = b;
                }
            }
            for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = src.at(best.y, best.x, c);
        }
    }
}

}  // namespace

Patch remove_foreground(const Patch& patch, const RemovalStrategy& strategy) {
    Patch out = patch;
    switch (strategy.kind) {
        case RemovalKind::ZeroFill: fill_constant(out, {0.0, 0.0, 0.0}); break;
        case RemovalKind::MeanFill: fill_mean(out, strategy); break;
        case RemovalKind::NearestInpaint: fill_nearest(out, strategy); break;
    }
    std::fill(out.labelmap.d.begin(), out.labelmap.d.end(), 0);
    // Only the ID -> OoD transition renames, so a second pass is a no-op.
    if (patch.role == PatchRole::ID) out.id = patch.id + "_ood";
    out.role = PatchRole::OoD;
    return out;
}

OodScore score_ood(const PredictFn& predict, const Patch& patch, double tau, int num_classes) {
    const ProbMaps probs = predict(patch);
    if (probs.classes != num_classes || probs.h != patch.image.h || probs.w != patch.image.w)
        throw std::invalid_argument("prediction shape mismatch for patch " + patch.id);
    const ClassMasks pred = threshold(probs, tau);
    ClassMasks empty_gt(num_classes, BinaryMask(patch.image.h, patch.image.w));
    OodScore s;
    s.patch_id = patch.id;
    s.score = patch_miou(pred, empty_gt);
    s.kept = s.score < 1.0;
    return s;
}

std::pair<DatasetManifest, std::vector<OodScore>> prune_ood(const PredictFn& predict,
                                                            const DatasetManifest& unfiltered,
                                                            double tau) {
    if (unfiltered.empty()) throw std::invalid_argument("prune_ood: no candidates");
    DatasetManifest filtered;
    filtered.classes = unfiltered.classes;
    std::vector<OodScore> scores;
    scores.reserve(unfiltered.patches.size());
    const int num_classes = static_cast<int>(unfiltered.classes.count());
    for (const auto& patch : unfiltered.patches) {
        if (patch.role != PatchRole::OoD)
            throw std::invalid_argument("prune_ood expects OoD candidates, got " + patch.id);
        OodScore s = score_ood(predict, patch, tau, num_classes);
        if (s.kept) filtered.patches.push_back(patch);
        scores.push_back(std::move(s));
    }
    return {std::move(filtered), std::move(scores)};
}

}  // namespace medood
