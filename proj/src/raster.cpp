#include "medood/raster.hpp"

#include <set>

namespace medood {

ClassList::ClassList(std::vector<std::string> names_) : names(std::move(names_)) {
    if (names.empty()) throw std::invalid_argument("class list needs at least one foreground class");
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) throw std::invalid_argument("class names must be non-empty");
        if (!seen.insert(n).second) throw std::invalid_argument("duplicate class name: " + n);
    }
}

ClassMasks masks_from_labelmap(const LabelMap& lm, int num_classes) {
    ClassMasks masks;
    masks.reserve(num_classes);
    for (int cls = 1; cls <= num_classes; ++cls) {
        BinaryMask m(lm.h, lm.w);
        for (std::size_t i = 0; i < lm.d.size(); ++i) m.d[i] = lm.d[i] == cls ? 1 : 0;
        masks.push_back(std::move(m));
    }
    return masks;
}

std::vector<BinaryMask> threshold(const ProbMaps& probs, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("threshold must be in (0,1)");
    std::vector<BinaryMask> masks;
    masks.reserve(probs.classes);
    const std::size_t plane = static_cast<std::size_t>(probs.h) * probs.w;
    for (int cls = 0; cls < probs.classes; ++cls) {
        BinaryMask m(probs.h, probs.w);
        const float* p = probs.d.data() + plane * cls;
        for (std::size_t i = 0; i < plane; ++i) m.d[i] = p[i] > tau ? 1 : 0;
        masks.push_back(std::move(m));
    }
    return masks;
}

}  // namespace medood
