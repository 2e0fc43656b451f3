#include "medood/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "medood/io_png.hpp"
#include "medood/rng.hpp"

namespace medood {

using ordered_json = nlohmann::ordered_json;

std::string to_string(PatchRole role) { return role == PatchRole::ID ? "ID" : "OoD"; }

PatchRole role_from_string(const std::string& s) {
    if (s == "ID") return PatchRole::ID;
    if (s == "OoD") return PatchRole::OoD;
    throw std::invalid_argument("unknown patch role: " + s);
}

bool Patch::is_positive() const {
    return std::any_of(labelmap.d.begin(), labelmap.d.end(), [](std::uint8_t v) { return v > 0; });
}

bool Patch::is_negative() const {
    return std::any_of(labelmap.d.begin(), labelmap.d.end(), [](std::uint8_t v) { return v == 0; });
}

std::pair<bool, bool> sample_polarity(const Patch& patch) {
    return {patch.is_positive(), patch.is_negative()};
}

std::map<std::string, int> DatasetManifest::folds() const {
    std::map<std::string, int> out;
    for (const auto& p : patches) out[p.id] = p.fold;
    return out;
}

DatasetManifest DatasetManifest::fold_subset(int fold, bool invert) const {
    DatasetManifest out;
    out.classes = classes;
    for (const auto& p : patches)
        if ((p.fold == fold) != invert) out.patches.push_back(p);
    return out;
}

std::vector<Patch> patchify(const LabeledRegion& region, int patch_size) {
    if (patch_size <= 0) throw std::invalid_argument("patch size must be >= 1");
    const int h = region.image.h, w = region.image.w;
    if (h <= 0 || w <= 0) throw std::invalid_argument("region " + region.id + " is empty");
    if (region.labelmap.h != h || region.labelmap.w != w)
        throw std::invalid_argument("region " + region.id + ": image/labelmap shape mismatch");

    const int rows = (h + patch_size - 1) / patch_size;
    const int cols = (w + patch_size - 1) / patch_size;
    std::vector<Patch> patches;
    patches.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Patch p;
            p.region_id = region.id;
            p.offset_row = r * patch_size;
            p.offset_col = c * patch_size;
            std::ostringstream id;
            id << region.id << "_r" << r << "c" << c;
            p.id = id.str();
            p.image = ImageU8(patch_size, patch_size, 3);
            p.labelmap = LabelMap(patch_size, patch_size);
            const int valid_h = std::min(patch_size, h - p.offset_row);
            const int valid_w = std::min(patch_size, w - p.offset_col);
            p.pad_rows = patch_size - valid_h;
            p.pad_cols = patch_size - valid_w;
            for (int y = 0; y < valid_h; ++y) {
                for (int x = 0; x < valid_w; ++x) {
                    for (int ch = 0; ch < 3; ++ch)
                        p.image.at(y, x, ch) = region.image.at(p.offset_row + y, p.offset_col + x, ch);
                    p.labelmap.at(y, x) = region.labelmap.at(p.offset_row + y, p.offset_col + x);
                }
            }
            p.role = PatchRole::ID;
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

std::map<std::string, int> split_folds(const std::vector<LabeledRegion>& regions, int k,
                                       std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("fold count must be >= 2");
    if (static_cast<int>(regions.size()) < k)
        throw std::invalid_argument("need at least as many regions as folds");
    std::vector<std::string> ids;
    ids.reserve(regions.size());
    for (const auto& r : regions) ids.push_back(r.id);
    Rng rng(seed);
    rng.shuffle(ids);
    std::map<std::string, int> folds;
    for (std::size_t i = 0; i < ids.size(); ++i) folds[ids[i]] = static_cast<int>(i % k);
    return folds;
}

void assign_folds(DatasetManifest& manifest, const std::map<std::string, int>& region_folds) {
    for (auto& p : manifest.patches) {
        auto it = region_folds.find(p.region_id);
        if (it == region_folds.end())
            throw std::invalid_argument("no fold assignment for region " + p.region_id);
        p.fold = it->second;
    }
}

void split_manifest_folds(DatasetManifest& manifest, int k, std::uint64_t seed) {
    // Region order follows first appearance in the manifest.
    std::vector<LabeledRegion> region_stubs;
    std::set<std::string> seen;
    for (const auto& p : manifest.patches) {
        if (seen.insert(p.region_id).second) {
            LabeledRegion stub;
            stub.id = p.region_id;
            region_stubs.push_back(std::move(stub));
        }
    }
    assign_folds(manifest, split_folds(region_stubs, k, seed));
}

namespace {

void validate_patch(const Patch& p, int num_classes) {
    if (p.image.h != p.labelmap.h || p.image.w != p.labelmap.w)
        throw std::runtime_error("patch " + p.id + ": image/labelmap shape mismatch");
    for (auto v : p.labelmap.d)
        if (v > num_classes)
            throw std::runtime_error("patch " + p.id + ": labelmap value " + std::to_string(v) +
                                     " exceeds class count " + std::to_string(num_classes));
    if (p.role == PatchRole::OoD && p.is_positive())
        throw std::runtime_error("patch " + p.id + ": OoD role with foreground labels");
}

}  // namespace

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "labels");

    ordered_json classes;
    classes["classes"] = manifest.classes.names;
    std::ofstream cls(dir / "classes.json");
    cls << classes.dump(2) << "\n";

    std::set<std::string> ids;
    std::ofstream out(dir / "manifest.jsonl");
    for (const auto& p : manifest.patches) {
        if (!ids.insert(p.id).second) throw std::runtime_error("duplicate patch id: " + p.id);
        validate_patch(p, manifest.classes.count());
        const std::string image_path = "images/" + p.id + ".png";
        const std::string label_path = "labels/" + p.id + ".png";
        write_png_rgb(dir / image_path, p.image);
        write_png_gray(dir / label_path, p.labelmap);
        ordered_json rec;
        rec["id"] = p.id;
        rec["region_id"] = p.region_id;
        rec["offset"] = {p.offset_row, p.offset_col};
        rec["pad"] = {p.pad_rows, p.pad_cols};
        rec["role"] = to_string(p.role);
        rec["fold"] = p.fold;
        rec["image_path"] = image_path;
        rec["label_path"] = label_path;
        out << rec.dump() << "\n";
    }
}

DatasetManifest load_manifest(const std::filesystem::path& dir_or_jsonl) {
    namespace fs = std::filesystem;
    fs::path dir = dir_or_jsonl;
    fs::path jsonl = dir / "manifest.jsonl";
    if (dir_or_jsonl.extension() == ".jsonl") {
        jsonl = dir_or_jsonl;
        dir = dir_or_jsonl.parent_path();
    }
    if (!fs::exists(jsonl)) throw std::runtime_error("missing manifest: " + jsonl.string());
    const fs::path classes_path = dir / "classes.json";
    if (!fs::exists(classes_path)) throw std::runtime_error("missing class list: " + classes_path.string());

    std::ifstream cls(classes_path);
    nlohmann::json classes_json = nlohmann::json::parse(cls);
    DatasetManifest manifest;
    manifest.classes = ClassList(classes_json.at("classes").get<std::vector<std::string>>());

    std::ifstream in(jsonl);
    std::string line;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        Patch p;
        p.id = rec.at("id").get<std::string>();
        if (!ids.insert(p.id).second) throw std::runtime_error("duplicate patch id: " + p.id);
        p.region_id = rec.at("region_id").get<std::string>();
        p.offset_row = rec.at("offset")[0].get<int>();
        p.offset_col = rec.at("offset")[1].get<int>();
        p.pad_rows = rec.at("pad")[0].get<int>();
        p.pad_cols = rec.at("pad")[1].get<int>();
        p.role = role_from_string(rec.at("role").get<std::string>());
        p.fold = rec.at("fold").get<int>();
        const fs::path image_path = dir / rec.at("image_path").get<std::string>();
        const fs::path label_path = dir / rec.at("label_path").get<std::string>();
        if (!fs::exists(image_path))
            throw std::runtime_error("patch " + p.id + ": missing image " + image_path.string());
        if (!fs::exists(label_path))
            throw std::runtime_error("patch " + p.id + ": missing labelmap " + label_path.string());
        p.image = read_png_rgb(image_path);
        p.labelmap = read_png_gray(label_path);
        validate_patch(p, manifest.classes.count());
        manifest.patches.push_back(std::move(p));
    }
    return manifest;
}

}  // namespace medood
