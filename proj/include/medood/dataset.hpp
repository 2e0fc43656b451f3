#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "medood/raster.hpp"

namespace medood {

struct LabeledRegion {
    std::string id;
    ImageU8 image;     // H x W x 3
    LabelMap labelmap;  // H x W, values in [0, |C|]
};

enum class PatchRole { ID, OoD };

std::string to_string(PatchRole role);
PatchRole role_from_string(const std::string& s);

struct Patch {
    std::string id;
    std::string region_id;
    int offset_row = 0;
    int offset_col = 0;
    ImageU8 image;     // P x P x 3
    LabelMap labelmap;  // P x P
    int pad_rows = 0;
    int pad_cols = 0;
    PatchRole role = PatchRole::ID;
    int fold = -1;  // -1 until split assigns one

    bool is_positive() const;  // any labelmap value > 0
    bool is_negative() const;  // any labelmap value == 0
};

// (is_positive, is_negative); padded pixels carry labelmap 0 and count as
// non-foreground.
std::pair<bool, bool> sample_polarity(const Patch& patch);

struct DatasetManifest {
    ClassList classes;
    std::vector<Patch> patches;

    std::size_t size() const { return patches.size(); }
    bool empty() const { return patches.empty(); }
    std::map<std::string, int> folds() const;
    DatasetManifest fold_subset(int fold, bool invert = false) const;  // invert=true keeps the other folds
};

// Tiles the region into ceil(H/P) x ceil(W/P) patches, row-major from (0,0),
// zero-filling image and labelmap past the region border.
std::vector<Patch> patchify(const LabeledRegion& region, int patch_size);

// Seeded shuffle then round-robin deal of regions into k folds.
// Returns region id -> fold index.
std::map<std::string, int> split_folds(const std::vector<LabeledRegion>& regions, int k, std::uint64_t seed);

// Fold assignment keyed by region id applied to every patch of the manifest.
void assign_folds(DatasetManifest& manifest, const std::map<std::string, int>& region_folds);

// Region-id-keyed split computed from the manifest's own patches (regions are
// recovered from patch provenance).
void split_manifest_folds(DatasetManifest& manifest, int k, std::uint64_t seed);

// On-disk layout: <dir>/manifest.jsonl + <dir>/classes.json +
// <dir>/images/*.png + <dir>/labels/*.png. Image paths inside the manifest
// are relative to <dir>.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& dir);
DatasetManifest load_manifest(const std::filesystem::path& dir_or_jsonl);

}  // namespace medood
