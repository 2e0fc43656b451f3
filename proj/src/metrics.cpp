#include "medood/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace medood {

namespace {

void check_shape(const BinaryMask& a, const BinaryMask& b) {
    if (a.h != b.h || a.w != b.w)
        throw std::invalid_argument("mask shape mismatch");
}

}  // namespace

double class_iou(const BinaryMask& pred, const BinaryMask& gt) {
    check_shape(pred, gt);
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.d.size(); ++i) {
        const bool p = pred.d[i] != 0, g = gt.d[i] != 0;
        inter += (p && g);
        uni += (p || g);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double class_dice(const BinaryMask& pred, const BinaryMask& gt) {
    check_shape(pred, gt);
    std::size_t inter = 0, total = 0;
    for (std::size_t i = 0; i < pred.d.size(); ++i) {
        const bool p = pred.d[i] != 0, g = gt.d[i] != 0;
        inter += (p && g);
        total += p;
        total += g;
    }
    if (total == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

double patch_miou(const ClassMasks& pred, const ClassMasks& gt) {
    if (pred.size() != gt.size() || pred.empty())
        throw std::invalid_argument("class mask count mismatch");
    double sum = 0.0;
    for (std::size_t c = 0; c < pred.size(); ++c) sum += class_iou(pred[c], gt[c]);
    return sum / static_cast<double>(pred.size());
}

double patch_dsc(const ClassMasks& pred, const ClassMasks& gt) {
    if (pred.size() != gt.size() || pred.empty())
        throw std::invalid_argument("class mask count mismatch");
    double sum = 0.0;
    for (std::size_t c = 0; c < pred.size(); ++c) sum += class_dice(pred[c], gt[c]);
    return sum / static_cast<double>(pred.size());
}

PatchMetrics evaluate_patch(const std::string& patch_id, const ClassMasks& pred, const ClassMasks& gt) {
    if (pred.size() != gt.size() || pred.empty())
        throw std::invalid_argument("class mask count mismatch");
    PatchMetrics m;
    m.patch_id = patch_id;
    m.per_class_iou.reserve(pred.size());
    m.per_class_dsc.reserve(pred.size());
    for (std::size_t c = 0; c < pred.size(); ++c) {
        m.per_class_iou.push_back(class_iou(pred[c], gt[c]));
        m.per_class_dsc.push_back(class_dice(pred[c], gt[c]));
    }
    double iou_sum = 0.0, dsc_sum = 0.0;
    for (std::size_t c = 0; c < pred.size(); ++c) {
        iou_sum += m.per_class_iou[c];
        dsc_sum += m.per_class_dsc[c];
    }
    m.miou = iou_sum / static_cast<double>(pred.size());
    m.dsc = dsc_sum / static_cast<double>(pred.size());
    return m;
}

MetricsReport aggregate(std::vector<PatchMetrics> reports, const ClassList& classes) {
    if (reports.empty()) throw std::invalid_argument("no patch metrics to aggregate");
    MetricsReport out;
    out.patch_count = reports.size();
    std::sort(reports.begin(), reports.end(),
              [](const PatchMetrics& a, const PatchMetrics& b) { return a.patch_id < b.patch_id; });
    std::vector<double> class_sums(classes.count(), 0.0);
    for (const auto& r : reports) {
        if (r.per_class_iou.size() != static_cast<std::size_t>(classes.count()))
            throw std::invalid_argument("per-class metrics do not match class list");
        out.miou += r.miou;
        out.dsc += r.dsc;
        for (std::size_t c = 0; c < class_sums.size(); ++c) class_sums[c] += r.per_class_iou[c];
    }
    const double n = static_cast<double>(reports.size());
    out.miou /= n;
    out.dsc /= n;
    for (std::size_t c = 0; c < class_sums.size(); ++c)
        out.per_class_iou[classes.name(static_cast<int>(c) + 1)] = class_sums[c] / n;
    return out;
}

}  // namespace medood
