#include "medood/balance.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "medood/rng.hpp"

namespace medood {

std::vector<double> BalanceConfig::default_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
    return g;
}

void BalanceConfig::validate() const {
    if (pnr_opt <= 0.0) throw std::invalid_argument("pnr_opt must be positive");
    if (theta.empty()) throw std::invalid_argument("pct grid must be non-empty");
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (theta[i] < 0.0 || theta[i] > 1.0)
            throw std::invalid_argument("pct grid values must be in [0,1]");
        if (i > 0 && theta[i] <= theta[i - 1])
            throw std::invalid_argument("pct grid must be strictly increasing");
    }
}

SampleCounts count_polarity(const DatasetManifest& dataset) {
    SampleCounts counts;
    for (const auto& p : dataset.patches) {
        const auto [pos, neg] = sample_polarity(p);
        counts.positives += pos;
        counts.negatives += neg;
    }
    return counts;
}

double compute_pnr(const DatasetManifest& dataset) {
    const SampleCounts c = count_polarity(dataset);
    if (c.negatives == 0) throw std::invalid_argument("dataset has no negative samples");
    return static_cast<double>(c.positives) / static_cast<double>(c.negatives);
}

std::size_t ood_sample_count(double pct, std::size_t n_ood) {
    if (pct < 0.0 || pct > 1.0) throw std::invalid_argument("pct must be in [0,1]");
    return static_cast<std::size_t>(std::floor(pct * static_cast<double>(n_ood) + 1e-6));
}

double balance_objective(double pct, std::size_t pos_id, std::size_t neg_id, std::size_t n_ood,
                         double pnr_opt) {
    const std::size_t n_add = ood_sample_count(pct, n_ood);
    const std::size_t neg = neg_id + n_add;
    if (neg == 0) throw std::invalid_argument("combined dataset has no negative samples");
    const double pnr = static_cast<double>(pos_id) / static_cast<double>(neg);
    return std::abs(pnr - pnr_opt);
}

double balance_objective(double pct, const DatasetManifest& d_ood, const DatasetManifest& d_id,
                         double pnr_opt) {
    const SampleCounts id = count_polarity(d_id);
    for (const auto& p : d_ood.patches)
        if (p.role != PatchRole::OoD)
            throw std::invalid_argument("balance_objective: non-OoD patch in d_ood: " + p.id);
    return balance_objective(pct, id.positives, id.negatives, d_ood.size(), pnr_opt);
}

BalanceReport estimate_pct_opt(std::size_t pos_id, std::size_t neg_id, std::size_t n_ood,
                               const BalanceConfig& config) {
    config.validate();
    BalanceReport report;
    report.pos_count = pos_id;
    report.neg_count = neg_id;
    report.n_ood_total = n_ood;
    report.pnr_opt = config.pnr_opt;
    if (neg_id == 0) throw std::invalid_argument("dataset has no negative samples");
    report.pnr_id = static_cast<double>(pos_id) / static_cast<double>(neg_id);

    bool have_best = false;
    for (double pct : config.theta) {
        const double f = balance_objective(pct, pos_id, neg_id, n_ood, config.pnr_opt);
        report.objective_curve.emplace_back(pct, f);
        if (!have_best || f < report.delta_pnr) {
            have_best = true;
            report.pct_opt = pct;
            report.delta_pnr = f;
        }
    }
    report.n_ood_selected = ood_sample_count(report.pct_opt, n_ood);
    report.pnr_combined = static_cast<double>(pos_id) /
                          static_cast<double>(neg_id + report.n_ood_selected);
    return report;
}

BalanceReport estimate_pct_opt(const DatasetManifest& d_ood, const DatasetManifest& d_id,
                               const BalanceConfig& config) {
    const SampleCounts id = count_polarity(d_id);
    for (const auto& p : d_ood.patches)
        if (p.role != PatchRole::OoD)
            throw std::invalid_argument("estimate_pct_opt: non-OoD patch in d_ood: " + p.id);
    return estimate_pct_opt(id.positives, id.negatives, d_ood.size(), config);
}

DatasetManifest sample_ood(const DatasetManifest& d_ood, double pct, std::uint64_t seed) {
    const std::size_t n = ood_sample_count(pct, d_ood.size());
    Rng rng(seed);
    std::vector<std::size_t> picked = rng.sample_indices(d_ood.size(), n);
    std::sort(picked.begin(), picked.end());
    DatasetManifest out;
    out.classes = d_ood.classes;
    out.patches.reserve(n);
    for (std::size_t i : picked) out.patches.push_back(d_ood.patches[i]);
    return out;
}

DatasetManifest combine_and_shuffle(const DatasetManifest& d_ood_opt, const DatasetManifest& d_id,
                                    std::uint64_t seed) {
    if (d_ood_opt.classes.names != d_id.classes.names)
        throw std::invalid_argument("cannot combine datasets with different class lists");
    DatasetManifest out;
    out.classes = d_id.classes;
    out.patches.reserve(d_id.size() + d_ood_opt.size());
    std::unordered_set<std::string> seen;
    for (const auto* src : {&d_id, &d_ood_opt}) {
        for (const auto& p : src->patches) {
            if (!seen.insert(p.id).second)
                throw std::invalid_argument("duplicate patch id when combining: " + p.id);
            out.patches.push_back(p);
        }
    }
    Rng rng(seed);
    rng.shuffle(out.patches);
    return out;
}

}  // namespace medood
