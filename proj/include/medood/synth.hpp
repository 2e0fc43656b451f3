#pragma once

#include <cstdint>
#include <vector>

#include "medood/dataset.hpp"

namespace medood {

// Desk-scale stand-in for a labeled histology dataset. Foreground objects are
// textured ellipses, one texture recipe per class; a configurable fraction of
// the background carries a confuser texture that resembles one designated
// class (the spurious cue) while staying labeled 0.
struct SynthConfig {
    int region_count = 12;
    int region_min_size = 96;
    int region_max_size = 128;
    int num_classes = 3;                  // 1..6 supported
    std::vector<double> class_density;    // target fg area fraction per class, in [0,1]
    double spurious_rate = 0.0;           // confuser fraction of background area, in [0,1]
    int confuser_class = 1;               // class the confuser resembles
    std::uint64_t seed = 0;

    void validate() const;
};

// Names of the built-in texture recipes, in class order.
ClassList synth_class_list(int num_classes);

struct SynthResult {
    std::vector<LabeledRegion> regions;
    // Per region: confuser pixels painted and total background pixels, so the
    // emitted spurious-cue fraction is measurable without re-deriving it.
    std::vector<std::size_t> confuser_pixels;
    std::vector<std::size_t> background_pixels;
};

SynthResult generate_synthetic_full(const SynthConfig& config);
std::vector<LabeledRegion> generate_synthetic(const SynthConfig& config);

}  // namespace medood
