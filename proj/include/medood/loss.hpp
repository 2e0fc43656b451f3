#pragma once

#include <cstdint>
#include <vector>

#include "medood/raster.hpp"
#include "medood/tensor.hpp"

namespace medood {

// Smoothed Dice loss 1 - (2*sum(pred*gt) + s) / (sum(pred) + sum(gt) + s) over
// one class map; gt may be null meaning the all-zero mask. Accumulation is in
// double regardless of T.
template <typename T>
double dice_loss(const T* pred, const std::uint8_t* gt, std::size_t n, double smooth);

// Same value; additionally accumulates scale * d(loss)/d(pred) into grad.
template <typename T>
double dice_loss_grad(const T* pred, const std::uint8_t* gt, std::size_t n, double smooth,
                      double scale, T* grad);

double dice_loss(const std::vector<float>& pred, const BinaryMask& gt, double smooth);

// Segmentation training loss over a batch of per-class probability maps:
// (1/|C|) * sum_c [ mean over ID samples of dice(F_c, GT_c)
//                   + lambda * mean over OoD samples of dice(F_c, 0) ].
// A role with no samples contributes 0. gts[i] holds the |C| ground-truth
// masks of sample i (all-zero masks for OoD samples). When dprobs is non-null
// it receives the gradient wrt probs (overwritten).
template <typename T>
double seg_loss(const Tensor4<T>& probs, const std::vector<ClassMasks>& gts,
                const std::vector<std::uint8_t>& is_ood, double lambda, double smooth,
                Tensor4<T>* dprobs = nullptr);

extern template double dice_loss<float>(const float*, const std::uint8_t*, std::size_t, double);
extern template double dice_loss<double>(const double*, const std::uint8_t*, std::size_t, double);
extern template double dice_loss_grad<float>(const float*, const std::uint8_t*, std::size_t, double,
                                             double, float*);
extern template double dice_loss_grad<double>(const double*, const std::uint8_t*, std::size_t,
                                              double, double, double*);
extern template double seg_loss<float>(const Tensor4<float>&, const std::vector<ClassMasks>&,
                                       const std::vector<std::uint8_t>&, double, double,
                                       Tensor4<float>*);
extern template double seg_loss<double>(const Tensor4<double>&, const std::vector<ClassMasks>&,
                                        const std::vector<std::uint8_t>&, double, double,
                                        Tensor4<double>*);

}  // namespace medood
