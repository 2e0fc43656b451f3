#include "medood/loss.hpp"

#include <stdexcept>

namespace medood {

template <typename T>
double dice_loss(const T* pred, const std::uint8_t* gt, std::size_t n, double smooth) {
    double s_pg = 0.0, s_p = 0.0, s_g = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = static_cast<double>(pred[i]);
        s_p += p;
        if (gt && gt[i]) {
            s_pg += p;
            s_g += 1.0;
        }
    }
    return 1.0 - (2.0 * s_pg + smooth) / (s_p + s_g + smooth);
}

template <typename T>
double dice_loss_grad(const T* pred, const std::uint8_t* gt, std::size_t n, double smooth,
                      double scale, T* grad) {
    double s_pg = 0.0, s_p = 0.0, s_g = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = static_cast<double>(pred[i]);
        s_p += p;
        if (gt && gt[i]) {
            s_pg += p;
            s_g += 1.0;
        }
    }
    const double num = 2.0 * s_pg + smooth;
    const double den = s_p + s_g + smooth;
    // d(loss)/d(p_i) = (num - 2*g_i*den) / den^2
    const double den2 = den * den;
    const double g0 = num / den2;              // background pixels
    const double g1 = (num - 2.0 * den) / den2;  // foreground pixels
    for (std::size_t i = 0; i < n; ++i) {
        const bool fg = gt && gt[i];
        grad[i] += static_cast<T>(scale * (fg ? g1 : g0));
    }
    return 1.0 - num / den;
}

double dice_loss(const std::vector<float>& pred, const BinaryMask& gt, double smooth) {
    if (pred.size() != gt.d.size()) throw std::invalid_argument("pred/gt size mismatch");
    return dice_loss(pred.data(), gt.d.data(), pred.size(), smooth);
}

template <typename T>
double seg_loss(const Tensor4<T>& probs, const std::vector<ClassMasks>& gts,
                const std::vector<std::uint8_t>& is_ood, double lambda, double smooth,
                Tensor4<T>* dprobs) {
    if (gts.size() != static_cast<std::size_t>(probs.n) || is_ood.size() != gts.size())
        throw std::invalid_argument("batch size mismatch");
    if (dprobs) {
        *dprobs = Tensor4<T>(probs.n, probs.c, probs.h, probs.w);
    }
    std::size_t n_id = 0, n_ood = 0;
    for (std::uint8_t f : is_ood) (f ? n_ood : n_id)++;

    const std::size_t plane = static_cast<std::size_t>(probs.h) * probs.w;
    double total = 0.0;
    for (int c = 0; c < probs.c; ++c) {
        double id_sum = 0.0, ood_sum = 0.0;
        for (int i = 0; i < probs.n; ++i) {
            const T* p = &probs.d[(static_cast<std::size_t>(i) * probs.c + c) * plane];
            const bool ood = is_ood[i] != 0;
            const std::uint8_t* gt = nullptr;
            if (!ood) {
                const BinaryMask& m = gts[i][c];
                if (m.h != probs.h || m.w != probs.w)
                    throw std::invalid_argument("ground-truth mask shape mismatch");
                gt = m.d.data();
            }
            const std::size_t n_role = ood ? n_ood : n_id;
            const double weight = (ood ? lambda : 1.0) / (static_cast<double>(probs.c) * n_role);
            if (dprobs) {
                T* g = &dprobs->d[(static_cast<std::size_t>(i) * probs.c + c) * plane];
                const double dl = dice_loss_grad(p, gt, plane, smooth, weight, g);
                (ood ? ood_sum : id_sum) += dl;
            } else {
                (ood ? ood_sum : id_sum) += dice_loss(p, gt, plane, smooth);
            }
        }
        if (n_id) total += id_sum / static_cast<double>(n_id);
        if (n_ood) total += lambda * ood_sum / static_cast<double>(n_ood);
    }
    return total / static_cast<double>(probs.c);
}

template double dice_loss<float>(const float*, const std::uint8_t*, std::size_t, double);
template double dice_loss<double>(const double*, const std::uint8_t*, std::size_t, double);
template double dice_loss_grad<float>(const float*, const std::uint8_t*, std::size_t, double,
                                      double, float*);
template double dice_loss_grad<double>(const double*, const std::uint8_t*, std::size_t, double,
                                       double, double*);
template double seg_loss<float>(const Tensor4<float>&, const std::vector<ClassMasks>&,
                                const std::vector<std::uint8_t>&, double, double, Tensor4<float>*);
template double seg_loss<double>(const Tensor4<double>&, const std::vector<ClassMasks>&,
                                 const std::vector<std::uint8_t>&, double, double,
                                 Tensor4<double>*);

}  // namespace medood
