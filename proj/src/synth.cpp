#include "medood/synth.hpp"

#include <algorithm>
#include <cmath>

#include "medood/rng.hpp"

namespace medood {

namespace {

struct Rgb {
    int r, g, b;
};

constexpr int kMaxClasses = 6;

// Texture recipes: one per class, plus the background. The confuser reuses a
// class's palette but drops its fine pattern, so it is separable only by
// texture detail, not by color.
const char* kClassNames[kMaxClasses] = {"speckle", "stripe", "radial", "dot", "band", "plain"};
const Rgb kClassBase[kMaxClasses] = {{122, 70, 152}, {58, 148, 138}, {208, 148, 58},
                                     {108, 140, 66}, {228, 108, 98}, {92, 102, 124}};
const Rgb kBackgroundBase = {212, 202, 208};

std::uint8_t clamp_u8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

void paint_background_pixel(ImageU8& img, int y, int x, Rng& rng) {
    const double shade = 6.0 * std::sin(0.07 * y) * std::cos(0.05 * x);
    const int noise = rng.next_int(-10, 10);
    img.at(y, x, 0) = clamp_u8(kBackgroundBase.r + noise + static_cast<int>(shade));
    img.at(y, x, 1) = clamp_u8(kBackgroundBase.g + noise + static_cast<int>(shade));
    img.at(y, x, 2) = clamp_u8(kBackgroundBase.b + noise + static_cast<int>(shade));
}

// cls in 1..6; pattern modulation keyed to region coordinates so it stays
// coherent across an object.
void paint_class_pixel(ImageU8& img, int y, int x, int cls, double dist2, Rng& rng) {
    const Rgb base = kClassBase[cls - 1];
    int dr = 0, dg = 0, db = 0;
    const int noise = rng.next_int(-8, 8);
    switch (cls) {
        case 1: {  // speckle: dark dots sprinkled over the base color
            if (rng.next_double() < 0.18) {
                dr = dg = db = -70;
            }
            break;
        }
        case 2: {  // stripe: horizontal bands
            const int s = static_cast<int>(28.0 * std::sin(1.3 * y));
            dr = dg = db = s;
            break;
        }
        case 3: {  // radial: darker toward the rim
            const int s = static_cast<int>(-45.0 * std::min(1.0, dist2));
            dr = dg = db = s;
            break;
        }
        case 4: {  // dot: bright grid dots
            if ((y % 5 == 0) && (x % 5 == 0)) dr = dg = db = 60;
            break;
        }
        case 5: {  // band: vertical bands
            const int s = static_cast<int>(26.0 * std::sin(1.1 * x));
            dr = dg = db = s;
            break;
        }
        default:
            break;  // plain
    }
    img.at(y, x, 0) = clamp_u8(base.r + dr + noise);
    img.at(y, x, 1) = clamp_u8(base.g + dg + noise);
    img.at(y, x, 2) = clamp_u8(base.b + db + noise);
}

// Confuser: the designated class's base color and coarse look without its
// fine pattern. Same color statistics, different micro-texture.
void paint_confuser_pixel(ImageU8& img, int y, int x, int cls, Rng& rng) {
    const Rgb base = kClassBase[cls - 1];
    const int noise = rng.next_int(-8, 8);
    img.at(y, x, 0) = clamp_u8(base.r + noise);
    img.at(y, x, 1) = clamp_u8(base.g + noise);
    img.at(y, x, 2) = clamp_u8(base.b + noise);
}

struct Ellipse {
    double cy, cx, ry, rx, angle;

    // Squared normalized distance; <= 1 means inside.
    double dist2(int y, int x) const {
        const double dy = y - cy, dx = x - cx;
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double u = (ca * dx + sa * dy) / rx;
        const double v = (-sa * dx + ca * dy) / ry;
        return u * u + v * v;
    }
};

Ellipse random_ellipse(Rng& rng, int h, int w) {
    Ellipse e;
    e.cy = rng.next_double(0.0, h);
    e.cx = rng.next_double(0.0, w);
    e.ry = rng.next_double(4.5, 11.0);
    e.rx = rng.next_double(4.5, 11.0);
    e.angle = rng.next_double(0.0, M_PI);
    return e;
}

}  // namespace

void SynthConfig::validate() const {
    if (region_count < 1) throw std::invalid_argument("region_count must be >= 1");
    if (region_min_size < 8 || region_max_size < region_min_size)
        throw std::invalid_argument("invalid region size range");
    if (num_classes < 1 || num_classes > kMaxClasses)
        throw std::invalid_argument("num_classes must be in 1..6");
    if (!class_density.empty() && static_cast<int>(class_density.size()) != num_classes)
        throw std::invalid_argument("class_density must have one entry per class");
    for (double d : class_density)
        if (d < 0.0 || d > 1.0) throw std::invalid_argument("class densities must be in [0,1]");
    if (spurious_rate < 0.0 || spurious_rate > 1.0)
        throw std::invalid_argument("spurious_rate must be in [0,1]");
    if (confuser_class < 1 || confuser_class > num_classes)
        throw std::invalid_argument("confuser_class must name a foreground class");
}

ClassList synth_class_list(int num_classes) {
    if (num_classes < 1 || num_classes > kMaxClasses)
        throw std::invalid_argument("num_classes must be in 1..6");
    std::vector<std::string> names(kClassNames, kClassNames + num_classes);
    return ClassList(std::move(names));
}

SynthResult generate_synthetic_full(const SynthConfig& config) {
    config.validate();
    std::vector<double> density = config.class_density;
    if (density.empty()) density.assign(config.num_classes, 0.08);

    SynthResult result;
    Rng rng(config.seed);
    for (int ri = 0; ri < config.region_count; ++ri) {
        LabeledRegion region;
        {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "region_%03d", ri);
            region.id = buf;
        }
        const int h = rng.next_int(config.region_min_size, config.region_max_size);
        const int w = rng.next_int(config.region_min_size, config.region_max_size);
        region.image = ImageU8(h, w, 3);
        region.labelmap = LabelMap(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) paint_background_pixel(region.image, y, x, rng);

        const std::size_t area = static_cast<std::size_t>(h) * w;
        for (int cls = 1; cls <= config.num_classes; ++cls) {
            const std::size_t target = static_cast<std::size_t>(density[cls - 1] * area);
            std::size_t painted = 0;
            int attempts = 0;
            while (painted < target && attempts < 600) {
                ++attempts;
                const Ellipse e = random_ellipse(rng, h, w);
                const int y0 = std::max(0, static_cast<int>(e.cy - std::max(e.ry, e.rx)) - 1);
                const int y1 = std::min(h - 1, static_cast<int>(e.cy + std::max(e.ry, e.rx)) + 1);
                const int x0 = std::max(0, static_cast<int>(e.cx - std::max(e.ry, e.rx)) - 1);
                const int x1 = std::min(w - 1, static_cast<int>(e.cx + std::max(e.ry, e.rx)) + 1);
                for (int y = y0; y <= y1; ++y) {
                    for (int x = x0; x <= x1; ++x) {
                        const double d2 = e.dist2(y, x);
                        // First label wins so object accounting stays exact.
                        if (d2 <= 1.0 && region.labelmap.at(y, x) == 0) {
                            region.labelmap.at(y, x) = static_cast<std::uint8_t>(cls);
                            paint_class_pixel(region.image, y, x, cls, d2, rng);
                            ++painted;
                        }
                    }
                }
            }
        }

        std::size_t background = 0;
        for (auto v : region.labelmap.d) background += (v == 0);
        std::size_t confusers = 0;
        if (config.spurious_rate > 0.0 && background > 0) {
            const std::size_t target = static_cast<std::size_t>(config.spurious_rate * background);
            std::vector<std::uint8_t> confuser_mask(area, 0);
            int attempts = 0;
            while (confusers < target && attempts < 4000) {
                ++attempts;
                const Ellipse e = random_ellipse(rng, h, w);
                const int y0 = std::max(0, static_cast<int>(e.cy - std::max(e.ry, e.rx)) - 1);
                const int y1 = std::min(h - 1, static_cast<int>(e.cy + std::max(e.ry, e.rx)) + 1);
                const int x0 = std::max(0, static_cast<int>(e.cx - std::max(e.ry, e.rx)) - 1);
                const int x1 = std::min(w - 1, static_cast<int>(e.cx + std::max(e.ry, e.rx)) + 1);
                for (int y = y0; y <= y1; ++y) {
                    for (int x = x0; x <= x1; ++x) {
                        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
                        if (e.dist2(y, x) <= 1.0 && region.labelmap.at(y, x) == 0 && !confuser_mask[idx]) {
                            confuser_mask[idx] = 1;
                            paint_confuser_pixel(region.image, y, x, config.confuser_class, rng);
                            ++confusers;
                        }
                    }
                }
            }
        }

        result.regions.push_back(std::move(region));
        result.confuser_pixels.push_back(confusers);
        result.background_pixels.push_back(background);
    }
    return result;
}

std::vector<LabeledRegion> generate_synthetic(const SynthConfig& config) {
    return generate_synthetic_full(config).regions;
}

}  // namespace medood
