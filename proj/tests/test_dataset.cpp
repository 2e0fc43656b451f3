#include <doctest.h>

#include <map>
#include <set>

#include "medood/dataset.hpp"
#include "medood/io_png.hpp"
#include "medood/rng.hpp"
#include "test_support.hpp"

using namespace medood;
using testsup::TempDir;

namespace {

LabeledRegion random_region(const std::string& id, int h, int w, int num_classes,
                            std::uint64_t seed) {
    LabeledRegion r;
    r.id = id;
    r.image = ImageU8(h, w, 3);
    r.labelmap = LabelMap(h, w);
    Rng rng(seed);
    for (auto& v : r.image.d) v = static_cast<std::uint8_t>(rng.next_int(0, 255));
    for (auto& v : r.labelmap.d) v = static_cast<std::uint8_t>(rng.next_int(0, num_classes));
    return r;
}

}  // namespace

TEST_CASE("patchify exact fit yields a single unpadded patch") {
    const LabeledRegion r = random_region("reg", 128, 128, 3, 1);
    const auto patches = patchify(r, 128);
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].id == "reg_r0c0");
    CHECK(patches[0].pad_rows == 0);
    CHECK(patches[0].pad_cols == 0);
    CHECK(patches[0].image == r.image);
    CHECK(patches[0].labelmap == r.labelmap);
    CHECK(patches[0].role == PatchRole::ID);
}

TEST_CASE("patchify pads the last row and column of the grid") {
    // 200 rows x 300 cols at 128 -> 2x3 grid, 84 pad cols on the right,
    // 56 pad rows at the bottom.
    const LabeledRegion r = random_region("reg", 200, 300, 3, 2);
    const auto patches = patchify(r, 128);
    REQUIRE(patches.size() == 6);
    std::map<std::string, const Patch*> by_id;
    for (const auto& p : patches) by_id[p.id] = &p;
    CHECK(by_id.count("reg_r1c2") == 1);
    CHECK(by_id["reg_r0c0"]->pad_rows == 0);
    CHECK(by_id["reg_r0c0"]->pad_cols == 0);
    CHECK(by_id["reg_r0c2"]->pad_cols == 84);
    CHECK(by_id["reg_r0c2"]->pad_rows == 0);
    CHECK(by_id["reg_r1c0"]->pad_rows == 56);
    CHECK(by_id["reg_r1c2"]->pad_rows == 56);
    CHECK(by_id["reg_r1c2"]->pad_cols == 84);
    // Padded pixels are zero in both rasters.
    const Patch& corner = *by_id["reg_r1c2"];
    for (int y = 0; y < 128; ++y) {
        for (int x = 0; x < 128; ++x) {
            if (y < 128 - corner.pad_rows && x < 128 - corner.pad_cols) continue;
            CHECK(corner.labelmap.at(y, x) == 0);
            for (int c = 0; c < 3; ++c) CHECK(corner.image.at(y, x, c) == 0);
        }
    }
}

TEST_CASE("patchify grid size follows ceil arithmetic") {
    const LabeledRegion r = random_region("big", 1016, 917, 3, 3);
    CHECK(patchify(r, 128).size() == 64);
}

TEST_CASE("patchify rejects non-positive patch size") {
    const LabeledRegion r = random_region("reg", 16, 16, 3, 4);
    CHECK_THROWS(patchify(r, 0));
    CHECK_THROWS(patchify(r, -3));
}

TEST_CASE("reassembling patches reproduces the region exactly") {
    const LabeledRegion r = random_region("reg", 70, 45, 3, 5);
    const auto patches = patchify(r, 32);
    ImageU8 image(70, 45, 3);
    LabelMap labels(70, 45);
    for (const auto& p : patches) {
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 32; ++x) {
                const int ry = p.offset_row + y, rx = p.offset_col + x;
                if (ry >= 70 || rx >= 45) continue;
                labels.at(ry, rx) = p.labelmap.at(y, x);
                for (int c = 0; c < 3; ++c) image.at(ry, rx, c) = p.image.at(y, x, c);
            }
        }
    }
    CHECK(image == r.image);
    CHECK(labels == r.labelmap);
}

TEST_CASE("sample_polarity covers the three cases") {
    CHECK(sample_polarity(testsup::tiny_patch("a", {0, 0, 0, 0}, 2)) ==
          std::pair<bool, bool>{false, true});
    CHECK(sample_polarity(testsup::tiny_patch("b", {1, 2, 1, 1}, 2)) ==
          std::pair<bool, bool>{true, false});
    CHECK(sample_polarity(testsup::tiny_patch("c", {1, 0, 0, 0}, 2)) ==
          std::pair<bool, bool>{true, true});
}

TEST_CASE("split_folds deals regions round-robin") {
    std::vector<LabeledRegion> regions;
    for (int i = 0; i < 9; ++i)
        regions.push_back(random_region("r" + std::to_string(i), 8, 8, 2, 10 + i));
    const auto folds = split_folds(regions, 3, 77);
    std::map<int, int> sizes;
    for (const auto& [id, f] : folds) {
        CHECK(f >= 0);
        CHECK(f < 3);
        ++sizes[f];
    }
    CHECK(sizes[0] == 3);
    CHECK(sizes[1] == 3);
    CHECK(sizes[2] == 3);
    CHECK(split_folds(regions, 3, 77) == folds);

    regions.push_back(random_region("r9", 8, 8, 2, 19));
    const auto folds10 = split_folds(regions, 3, 77);
    std::map<int, int> sizes10;
    for (const auto& [id, f] : folds10) ++sizes10[f];
    std::multiset<int> observed{sizes10[0], sizes10[1], sizes10[2]};
    CHECK(observed == std::multiset<int>{3, 3, 4});
}

TEST_CASE("split_folds needs at least k regions") {
    std::vector<LabeledRegion> regions = {random_region("only", 8, 8, 2, 1)};
    CHECK_THROWS(split_folds(regions, 2, 0));
}

TEST_CASE("patches of one region never straddle folds") {
    std::vector<LabeledRegion> regions;
    for (int i = 0; i < 6; ++i)
        regions.push_back(random_region("r" + std::to_string(i), 48, 48, 3, 30 + i));
    DatasetManifest manifest;
    manifest.classes = ClassList({"a", "b", "c"});
    for (const auto& r : regions)
        for (auto& p : patchify(r, 32)) manifest.patches.push_back(std::move(p));
    split_manifest_folds(manifest, 3, 5);
    std::map<std::string, std::set<int>> region_folds;
    for (const auto& p : manifest.patches) {
        CHECK(p.fold >= 0);
        region_folds[p.region_id].insert(p.fold);
    }
    for (const auto& [id, fs] : region_folds) CHECK(fs.size() == 1);

    const DatasetManifest test = manifest.fold_subset(0);
    const DatasetManifest train = manifest.fold_subset(0, true);
    CHECK(test.size() + train.size() == manifest.size());
    for (const auto& p : test.patches) CHECK(p.fold == 0);
    for (const auto& p : train.patches) CHECK(p.fold != 0);
}

TEST_CASE("manifest round-trips through disk") {
    TempDir tmp;
    DatasetManifest manifest;
    manifest.classes = ClassList({"a", "b"});
    const LabeledRegion r = random_region("reg", 40, 40, 2, 8);
    for (auto& p : patchify(r, 32)) manifest.patches.push_back(std::move(p));
    manifest.patches[1].role = PatchRole::OoD;
    std::fill(manifest.patches[1].labelmap.d.begin(), manifest.patches[1].labelmap.d.end(), 0);
    for (auto& p : manifest.patches) p.fold = 1;

    save_manifest(manifest, tmp.path / "ds");
    const DatasetManifest loaded = load_manifest(tmp.path / "ds");
    REQUIRE(loaded.size() == manifest.size());
    CHECK(loaded.classes.names == manifest.classes.names);
    for (std::size_t i = 0; i < manifest.size(); ++i)
        CHECK(testsup::patches_equal(loaded.patches[i], manifest.patches[i]));
}

TEST_CASE("load rejects labelmap values beyond the class list") {
    TempDir tmp;
    DatasetManifest manifest;
    manifest.classes = ClassList({"a", "b"});
    manifest.patches.push_back(testsup::tiny_patch("bad_patch", {0, 1, 1, 0}, 2));
    save_manifest(manifest, tmp.path / "ds");
    LabelMap evil(2, 2);
    evil.d = {0, 3, 0, 0};  // 3 > |C|=2
    write_png_gray(tmp.path / "ds" / "labels" / "bad_patch.png", evil);
    CHECK_THROWS_WITH_AS(load_manifest(tmp.path / "ds"),
                         doctest::Contains("bad_patch"), std::runtime_error);
}

TEST_CASE("empty manifest loads as an empty collection") {
    TempDir tmp;
    DatasetManifest manifest;
    manifest.classes = ClassList({"a"});
    save_manifest(manifest, tmp.path / "ds");
    const DatasetManifest loaded = load_manifest(tmp.path / "ds");
    CHECK(loaded.empty());
    CHECK(loaded.classes.names == std::vector<std::string>{"a"});
}

TEST_CASE("load reports missing directories") {
    CHECK_THROWS(load_manifest("/nonexistent/medood_ds"));
}
