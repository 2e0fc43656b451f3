#pragma once

#include <map>
#include <string>
#include <vector>

#include "medood/raster.hpp"

namespace medood {

// |pred ∩ gt| / |pred ∪ gt|; both empty -> 1.0. The empty-empty convention is
// load-bearing: a background-only patch predicted empty must score a perfect
// 1.0 so redundancy pruning has something to key on.
double class_iou(const BinaryMask& pred, const BinaryMask& gt);

// 2|pred ∩ gt| / (|pred| + |gt|); both empty -> 1.0.
double class_dice(const BinaryMask& pred, const BinaryMask& gt);

// Arithmetic mean of class_iou over all foreground classes.
double patch_miou(const ClassMasks& pred, const ClassMasks& gt);
double patch_dsc(const ClassMasks& pred, const ClassMasks& gt);

struct PatchMetrics {
    std::string patch_id;
    std::vector<double> per_class_iou;  // one entry per foreground class
    std::vector<double> per_class_dsc;
    double miou = 0.0;
    double dsc = 0.0;
};

PatchMetrics evaluate_patch(const std::string& patch_id, const ClassMasks& pred, const ClassMasks& gt);

struct MetricsReport {
    double miou = 0.0;  // unweighted mean over patches of per-patch class-mean IoU
    double dsc = 0.0;
    std::map<std::string, double> per_class_iou;  // class name -> mean over patches
    std::size_t patch_count = 0;
};

// Patches are sorted by id before averaging so the report is independent of
// input order.
MetricsReport aggregate(std::vector<PatchMetrics> reports, const ClassList& classes);

}  // namespace medood
