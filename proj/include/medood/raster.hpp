#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace medood {

// 8-bit interleaved raster, row-major, d[(y*w + x)*c + ch].
struct ImageU8 {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<std::uint8_t> d;

    ImageU8() = default;
    ImageU8(int h_, int w_, int c_, std::uint8_t fill = 0)
        : h(h_), w(w_), c(c_), d(static_cast<std::size_t>(h_) * w_ * c_, fill) {}

    std::uint8_t& at(int y, int x, int ch) { return d[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
    std::uint8_t at(int y, int x, int ch) const { return d[(static_cast<std::size_t>(y) * w + x) * c + ch]; }

    bool operator==(const ImageU8&) const = default;
};

// Single-channel class-index map, 0 = non-foreground.
struct LabelMap {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> d;

    LabelMap() = default;
    LabelMap(int h_, int w_, std::uint8_t fill = 0)
        : h(h_), w(w_), d(static_cast<std::size_t>(h_) * w_, fill) {}

    std::uint8_t& at(int y, int x) { return d[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return d[static_cast<std::size_t>(y) * w + x]; }

    bool operator==(const LabelMap&) const = default;
};

// 0/1 mask with the same layout as LabelMap.
struct BinaryMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> d;

    BinaryMask() = default;
    BinaryMask(int h_, int w_, std::uint8_t fill = 0)
        : h(h_), w(w_), d(static_cast<std::size_t>(h_) * w_, fill) {}

    std::uint8_t& at(int y, int x) { return d[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return d[static_cast<std::size_t>(y) * w + x]; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : d) n += (v != 0);
        return n;
    }
};

// Per-foreground-class probability grids in [0,1], d[(cls*h + y)*w + x] with
// cls in 0..classes-1 for foreground classes 1..|C|.
struct ProbMaps {
    int classes = 0;
    int h = 0;
    int w = 0;
    std::vector<float> d;

    ProbMaps() = default;
    ProbMaps(int classes_, int h_, int w_, float fill = 0.f)
        : classes(classes_), h(h_), w(w_), d(static_cast<std::size_t>(classes_) * h_ * w_, fill) {}

    float& at(int cls, int y, int x) { return d[(static_cast<std::size_t>(cls) * h + y) * w + x]; }
    float at(int cls, int y, int x) const { return d[(static_cast<std::size_t>(cls) * h + y) * w + x]; }
};

// Per-class mask = (prob > tau), strict so a probability exactly at the
// threshold is excluded.
std::vector<BinaryMask> threshold(const ProbMaps& probs, double tau);

// Ordered foreground class names; index 0 is reserved for non-foreground
// and never appears in the list.
struct ClassList {
    std::vector<std::string> names;

    ClassList() = default;
    explicit ClassList(std::vector<std::string> names_);

    int count() const { return static_cast<int>(names.size()); }
    const std::string& name(int cls) const { return names.at(static_cast<std::size_t>(cls) - 1); }  // cls in 1..|C|
};

// One binary mask per foreground class, pred/gt pairs feed the metrics.
using ClassMasks = std::vector<BinaryMask>;

// Per-class mask c is (labelmap == c), c in 1..num_classes.
ClassMasks masks_from_labelmap(const LabelMap& lm, int num_classes);

}  // namespace medood
