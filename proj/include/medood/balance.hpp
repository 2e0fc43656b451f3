#pragma once

#include <cstdint>
#include <vector>

#include "medood/dataset.hpp"

namespace medood {

struct BalanceConfig {
    double pnr_opt = 0.65;
    std::vector<double> theta = default_grid();  // pct search space, strictly increasing in [0,1]
    std::uint64_t seed = 0;

    static std::vector<double> default_grid();  // {0.0, 0.1, ..., 1.0}
    void validate() const;
};

struct SampleCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;  // a mixed patch counts once in each
};

SampleCounts count_polarity(const DatasetManifest& dataset);

// |positives| / |negatives|; throws when there are no negatives.
double compute_pnr(const DatasetManifest& dataset);

// floor(pct * n_ood), with a tiny epsilon so grid values like 0.6 that are not
// exactly representable still select the intended integer count.
std::size_t ood_sample_count(double pct, std::size_t n_ood);

// f_T in closed form on counts: every OoD patch is purely negative, so the
// combined pnr depends only on how many are added, not which.
double balance_objective(double pct, std::size_t pos_id, std::size_t neg_id, std::size_t n_ood,
                         double pnr_opt);
double balance_objective(double pct, const DatasetManifest& d_ood, const DatasetManifest& d_id,
                         double pnr_opt);

struct BalanceReport {
    std::size_t pos_count = 0;  // positives of D_id
    std::size_t neg_count = 0;  // negatives of D_id
    double pnr_id = 0.0;        // pos_count / neg_count before any OoD
    double pct_opt = 0.0;
    double pnr_combined = 0.0;  // pnr of the chosen combined set
    double delta_pnr = 0.0;     // |pnr_combined - pnr_opt| == objective_curve at pct_opt
    std::size_t n_ood_total = 0;
    std::size_t n_ood_selected = 0;  // floor(pct_opt * n_ood_total)
    double pnr_opt = 0.0;
    std::vector<std::pair<double, double>> objective_curve;  // (pct, f_T) over the grid
};

// Grid argmin of the balance objective; ties go to the smallest pct (more OoD
// than needed is known to degrade).
BalanceReport estimate_pct_opt(std::size_t pos_id, std::size_t neg_id, std::size_t n_ood,
                               const BalanceConfig& config);
BalanceReport estimate_pct_opt(const DatasetManifest& d_ood, const DatasetManifest& d_id,
                               const BalanceConfig& config);

// floor(pct*|d_ood|) patches drawn uniformly without replacement, seeded.
DatasetManifest sample_ood(const DatasetManifest& d_ood, double pct, std::uint64_t seed);

// Concatenation followed by a seeded uniform permutation; throws on duplicate
// patch ids.
DatasetManifest combine_and_shuffle(const DatasetManifest& d_ood_opt, const DatasetManifest& d_id,
                                    std::uint64_t seed);

}  // namespace medood
