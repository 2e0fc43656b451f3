#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "medood/rng.hpp"
#include "medood/tensor.hpp"

namespace medood {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// 2D convolution, stride 1, zero padding k/2 so spatial size is preserved.
// Weights are row-major [out_c][in_c*k*k].
template <typename T>
struct Conv2d {
    int in_c = 0;
    int out_c = 0;
    int k = 3;
    std::vector<T> w, b, gw, gb;
    Tensor4<T> x_cache;

    Conv2d() = default;
    Conv2d(int in_c_, int out_c_, int k_) : in_c(in_c_), out_c(out_c_), k(k_) {
        w.assign(static_cast<std::size_t>(out_c) * in_c * k * k, T(0));
        b.assign(out_c, T(0));
        gw.assign(w.size(), T(0));
        gb.assign(b.size(), T(0));
    }

    void init(Rng& rng) {
        const double stddev = std::sqrt(2.0 / (static_cast<double>(in_c) * k * k));
        for (auto& v : w) v = static_cast<T>(rng.next_normal() * stddev);
        for (auto& v : b) v = T(0);
    }

    // col is (in_c*k*k) x (h*w), row-major; row r = (ci*k + ky)*k + kx.
    static void im2col(const T* x, int c, int h, int w_, int k, MatRM<T>& col) {
        const int pad = k / 2;
        for (int ci = 0; ci < c; ++ci) {
            const T* plane = x + static_cast<std::size_t>(ci) * h * w_;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    T* row = col.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * h * w_;
                    for (int y = 0; y < h; ++y) {
                        const int iy = y + ky - pad;
                        T* out = row + static_cast<std::size_t>(y) * w_;
                        if (iy < 0 || iy >= h) {
                            for (int x2 = 0; x2 < w_; ++x2) out[x2] = T(0);
                            continue;
                        }
                        const T* in = plane + static_cast<std::size_t>(iy) * w_;
                        for (int x2 = 0; x2 < w_; ++x2) {
                            const int ix = x2 + kx - pad;
                            out[x2] = (ix < 0 || ix >= w_) ? T(0) : in[ix];
                        }
                    }
                }
            }
        }
    }

    static void col2im(const MatRM<T>& col, int c, int h, int w_, int k, T* dx) {
        const int pad = k / 2;
        for (int ci = 0; ci < c; ++ci) {
            T* plane = dx + static_cast<std::size_t>(ci) * h * w_;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const T* row = col.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * h * w_;
                    for (int y = 0; y < h; ++y) {
                        const int iy = y + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const T* in = row + static_cast<std::size_t>(y) * w_;
                        T* out = plane + static_cast<std::size_t>(iy) * w_;
                        for (int x2 = 0; x2 < w_; ++x2) {
                            const int ix = x2 + kx - pad;
                            if (ix >= 0 && ix < w_) out[ix] += in[x2];
                        }
                    }
                }
            }
        }
    }

    Tensor4<T> apply(const Tensor4<T>& x) const {
        Tensor4<T> y(x.n, out_c, x.h, x.w);
        const int hw = x.h * x.w;
        const int kk = in_c * k * k;
        MatRM<T> col(kk, hw);
        Eigen::Map<const MatRM<T>> W(w.data(), out_c, kk);
        for (int i = 0; i < x.n; ++i) {
            im2col(x.sample(i), in_c, x.h, x.w, k, col);
            Eigen::Map<MatRM<T>> out(y.sample(i), out_c, hw);
            out.noalias() = W * col;
            for (int ch = 0; ch < out_c; ++ch) out.row(ch).array() += b[ch];
        }
        return y;
    }

    Tensor4<T> forward(const Tensor4<T>& x) {
        x_cache = x;
        return apply(x);
    }

    Tensor4<T> backward(const Tensor4<T>& dy) {
        const Tensor4<T>& x = x_cache;
        Tensor4<T> dx(x.n, in_c, x.h, x.w);
        const int hw = x.h * x.w;
        const int kk = in_c * k * k;
        MatRM<T> col(kk, hw), dcol(kk, hw);
        Eigen::Map<const MatRM<T>> W(w.data(), out_c, kk);
        Eigen::Map<MatRM<T>> gW(gw.data(), out_c, kk);
        for (int i = 0; i < x.n; ++i) {
            im2col(x.sample(i), in_c, x.h, x.w, k, col);
            Eigen::Map<const MatRM<T>> dOut(dy.sample(i), out_c, hw);
            gW.noalias() += dOut * col.transpose();
            // Scalar accumulation: a vectorized reduction peels lanes by heap
            // alignment, which would make reruns drift bit by bit.
            for (int ch = 0; ch < out_c; ++ch) {
                const T* row = dy.sample(i) + static_cast<std::size_t>(ch) * hw;
                double s = 0.0;
                for (int p = 0; p < hw; ++p) s += row[p];
                gb[ch] += static_cast<T>(s);
            }
            dcol.noalias() = W.transpose() * dOut;
            col2im(dcol, in_c, x.h, x.w, k, dx.sample(i));
        }
        return dx;
    }
};

template <typename T>
struct BatchNorm2d {
    int channels = 0;
    T eps = T(1e-5);
    T momentum = T(0.1);
    std::vector<T> gamma, beta, ggamma, gbeta;
    std::vector<T> run_mean, run_var;
    Tensor4<T> xhat_cache;
    std::vector<T> inv_std_cache;

    BatchNorm2d() = default;
    explicit BatchNorm2d(int channels_) : channels(channels_) {
        gamma.assign(channels, T(1));
        beta.assign(channels, T(0));
        ggamma.assign(channels, T(0));
        gbeta.assign(channels, T(0));
        run_mean.assign(channels, T(0));
        run_var.assign(channels, T(1));
    }

    Tensor4<T> infer(const Tensor4<T>& x) const {
        Tensor4<T> y(x.n, x.c, x.h, x.w);
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        for (int ch = 0; ch < channels; ++ch) {
            const T scale = gamma[ch] / std::sqrt(run_var[ch] + eps);
            const T shift = beta[ch] - scale * run_mean[ch];
            for (int i = 0; i < x.n; ++i) {
                const T* in = x.sample(i) + plane * ch;
                T* out = y.sample(i) + plane * ch;
                for (std::size_t p = 0; p < plane; ++p) out[p] = scale * in[p] + shift;
            }
        }
        return y;
    }

    Tensor4<T> forward(const Tensor4<T>& x, bool train) {
        if (!train) return infer(x);
        Tensor4<T> y(x.n, x.c, x.h, x.w);
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        xhat_cache = Tensor4<T>(x.n, x.c, x.h, x.w);
        inv_std_cache.assign(channels, T(0));
        const double count = static_cast<double>(x.n) * plane;
        for (int ch = 0; ch < channels; ++ch) {
            double sum = 0.0, sq = 0.0;
            for (int i = 0; i < x.n; ++i) {
                const T* in = x.sample(i) + plane * ch;
                for (std::size_t p = 0; p < plane; ++p) {
                    sum += in[p];
                    sq += static_cast<double>(in[p]) * in[p];
                }
            }
            const double mean = sum / count;
            const double var = sq / count - mean * mean;  // biased
            const T inv_std = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
            inv_std_cache[ch] = inv_std;
            run_mean[ch] = (T(1) - momentum) * run_mean[ch] + momentum * static_cast<T>(mean);
            run_var[ch] = (T(1) - momentum) * run_var[ch] + momentum * static_cast<T>(var);
            for (int i = 0; i < x.n; ++i) {
                const T* in = x.sample(i) + plane * ch;
                T* xh = xhat_cache.sample(i) + plane * ch;
                T* out = y.sample(i) + plane * ch;
                for (std::size_t p = 0; p < plane; ++p) {
                    xh[p] = (in[p] - static_cast<T>(mean)) * inv_std;
                    out[p] = gamma[ch] * xh[p] + beta[ch];
                }
            }
        }
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& dy) {
        const Tensor4<T>& xh = xhat_cache;
        Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
        const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
        const double count = static_cast<double>(dy.n) * plane;
        for (int ch = 0; ch < channels; ++ch) {
            double sum_dy = 0.0, sum_dy_xh = 0.0;
            for (int i = 0; i < dy.n; ++i) {
                const T* g = dy.sample(i) + plane * ch;
                const T* x = xh.sample(i) + plane * ch;
                for (std::size_t p = 0; p < plane; ++p) {
                    sum_dy += g[p];
                    sum_dy_xh += static_cast<double>(g[p]) * x[p];
                }
            }
            ggamma[ch] += static_cast<T>(sum_dy_xh);
            gbeta[ch] += static_cast<T>(sum_dy);
            const T mean_dy = static_cast<T>(sum_dy / count);
            const T mean_dy_xh = static_cast<T>(sum_dy_xh / count);
            const T scale = gamma[ch] * inv_std_cache[ch];
            for (int i = 0; i < dy.n; ++i) {
                const T* g = dy.sample(i) + plane * ch;
                const T* x = xh.sample(i) + plane * ch;
                T* out = dx.sample(i) + plane * ch;
                for (std::size_t p = 0; p < plane; ++p)
                    out[p] = scale * (g[p] - mean_dy - x[p] * mean_dy_xh);
            }
        }
        return dx;
    }
};

template <typename T>
inline void relu_inplace(Tensor4<T>& x) {
    for (auto& v : x.d) v = v > T(0) ? v : T(0);
}

template <typename T>
inline Tensor4<T> relu_backward(const Tensor4<T>& dy, const Tensor4<T>& y) {
    Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (std::size_t i = 0; i < dy.d.size(); ++i) dx.d[i] = y.d[i] > T(0) ? dy.d[i] : T(0);
    return dx;
}

// 2x2 max pooling, stride 2; ties go to the first element in scan order.
template <typename T>
struct MaxPool2 {
    std::vector<std::uint32_t> argmax;
    int in_h = 0, in_w = 0;

    Tensor4<T> forward(const Tensor4<T>& x, bool keep_argmax = true) {
        if (x.h % 2 != 0 || x.w % 2 != 0) throw std::invalid_argument("maxpool needs even spatial size");
        in_h = x.h;
        in_w = x.w;
        Tensor4<T> y(x.n, x.c, x.h / 2, x.w / 2);
        if (keep_argmax) argmax.assign(y.d.size(), 0);
        std::size_t o = 0;
        for (int i = 0; i < x.n; ++i) {
            for (int ch = 0; ch < x.c; ++ch) {
                const T* plane = x.sample(i) + static_cast<std::size_t>(ch) * x.h * x.w;
                for (int y2 = 0; y2 < y.h; ++y2) {
                    for (int x2 = 0; x2 < y.w; ++x2, ++o) {
                        T best = plane[(2 * y2) * x.w + 2 * x2];
                        std::uint32_t best_idx = static_cast<std::uint32_t>((2 * y2) * x.w + 2 * x2);
                        for (int ky = 0; ky < 2; ++ky) {
                            for (int kx = 0; kx < 2; ++kx) {
                                const std::uint32_t idx =
                                    static_cast<std::uint32_t>((2 * y2 + ky) * x.w + 2 * x2 + kx);
                                if (plane[idx] > best) {
                                    best = plane[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        y.d[o] = best;
                        if (keep_argmax) argmax[o] = best_idx;
                    }
                }
            }
        }
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& dy) {
        Tensor4<T> dx(dy.n, dy.c, in_h, in_w);
        std::size_t o = 0;
        for (int i = 0; i < dy.n; ++i) {
            for (int ch = 0; ch < dy.c; ++ch) {
                T* plane = dx.sample(i) + static_cast<std::size_t>(ch) * in_h * in_w;
                const std::size_t n_out = static_cast<std::size_t>(dy.h) * dy.w;
                for (std::size_t p = 0; p < n_out; ++p, ++o) plane[argmax[o]] += dy.d[o];
            }
        }
        return dx;
    }
};

template <typename T>
inline Tensor4<T> upsample_nearest2(const Tensor4<T>& x) {
    Tensor4<T> y(x.n, x.c, x.h * 2, x.w * 2);
    for (int i = 0; i < x.n; ++i) {
        for (int ch = 0; ch < x.c; ++ch) {
            const T* in = x.sample(i) + static_cast<std::size_t>(ch) * x.h * x.w;
            T* out = y.sample(i) + static_cast<std::size_t>(ch) * y.h * y.w;
            for (int y2 = 0; y2 < x.h; ++y2) {
                for (int x2 = 0; x2 < x.w; ++x2) {
                    const T v = in[y2 * x.w + x2];
                    out[(2 * y2) * y.w + 2 * x2] = v;
                    out[(2 * y2) * y.w + 2 * x2 + 1] = v;
                    out[(2 * y2 + 1) * y.w + 2 * x2] = v;
                    out[(2 * y2 + 1) * y.w + 2 * x2 + 1] = v;
                }
            }
        }
    }
    return y;
}

template <typename T>
inline Tensor4<T> upsample_nearest2_backward(const Tensor4<T>& dy) {
    Tensor4<T> dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int i = 0; i < dy.n; ++i) {
        for (int ch = 0; ch < dy.c; ++ch) {
            const T* in = dy.sample(i) + static_cast<std::size_t>(ch) * dy.h * dy.w;
            T* out = dx.sample(i) + static_cast<std::size_t>(ch) * dx.h * dx.w;
            for (int y2 = 0; y2 < dx.h; ++y2) {
                for (int x2 = 0; x2 < dx.w; ++x2) {
                    out[y2 * dx.w + x2] = in[(2 * y2) * dy.w + 2 * x2] + in[(2 * y2) * dy.w + 2 * x2 + 1] +
                                          in[(2 * y2 + 1) * dy.w + 2 * x2] +
                                          in[(2 * y2 + 1) * dy.w + 2 * x2 + 1];
                }
            }
        }
    }
    return dx;
}

template <typename T>
inline Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    Tensor4<T> y(a.n, a.c + b.c, a.h, a.w);
    const std::size_t plane_a = static_cast<std::size_t>(a.c) * a.h * a.w;
    const std::size_t plane_b = static_cast<std::size_t>(b.c) * b.h * b.w;
    for (int i = 0; i < a.n; ++i) {
        std::copy(a.sample(i), a.sample(i) + plane_a, y.sample(i));
        std::copy(b.sample(i), b.sample(i) + plane_b, y.sample(i) + plane_a);
    }
    return y;
}

template <typename T>
inline std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& y, int c_a) {
    Tensor4<T> a(y.n, c_a, y.h, y.w), b(y.n, y.c - c_a, y.h, y.w);
    const std::size_t plane_a = a.sample_size();
    const std::size_t plane_b = b.sample_size();
    for (int i = 0; i < y.n; ++i) {
        std::copy(y.sample(i), y.sample(i) + plane_a, a.sample(i));
        std::copy(y.sample(i) + plane_a, y.sample(i) + plane_a + plane_b, b.sample(i));
    }
    return {std::move(a), std::move(b)};
}

// conv -> (bn) -> relu, twice.
template <typename T>
struct ConvBlock {
    Conv2d<T> conv1, conv2;
    BatchNorm2d<T> bn1, bn2;
    bool use_bn = true;
    Tensor4<T> y1_cache, y2_cache;  // post-relu activations for the relu grads

    ConvBlock() = default;
    ConvBlock(int in_c, int out_c, bool use_bn_)
        : conv1(in_c, out_c, 3), conv2(out_c, out_c, 3), bn1(out_c), bn2(out_c), use_bn(use_bn_) {}

    void init(Rng& rng) {
        conv1.init(rng);
        conv2.init(rng);
    }

    Tensor4<T> forward(const Tensor4<T>& x, bool train) {
        Tensor4<T> y = conv1.forward(x);
        if (use_bn) y = bn1.forward(y, train);
        relu_inplace(y);
        y1_cache = y;
        y = conv2.forward(y);
        if (use_bn) y = bn2.forward(y, train);
        relu_inplace(y);
        y2_cache = y;
        return y;
    }

    Tensor4<T> infer(const Tensor4<T>& x) const {
        Tensor4<T> y = conv1.apply(x);
        if (use_bn) y = bn1.infer(y);
        relu_inplace(y);
        y = conv2.apply(y);
        if (use_bn) y = bn2.infer(y);
        relu_inplace(y);
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& dy) {
        Tensor4<T> g = relu_backward(dy, y2_cache);
        if (use_bn) g = bn2.backward(g);
        g = conv2.backward(g);
        g = relu_backward(g, y1_cache);
        if (use_bn) g = bn1.backward(g);
        return conv1.backward(g);
    }
};

// Encoder-decoder with skip connections: two downsampling stages (16, 32), a
// bottleneck (64), two upsampling stages, and a 1x1 per-class head with a
// logistic output. Fully convolutional; any input size divisible by 4 works.
template <typename T>
struct SegNet {
    int num_classes = 0;
    bool batchnorm = true;
    int w1 = 16, w2 = 32, wb = 64;
    std::uint64_t init_seed = 0;

    ConvBlock<T> enc1, enc2, bottleneck, dec2, dec1;
    Conv2d<T> head;
    MaxPool2<T> pool1, pool2;
    Tensor4<T> probs_cache;

    SegNet() = default;
    SegNet(int num_classes_, bool batchnorm_, std::uint64_t seed)
        : num_classes(num_classes_),
          batchnorm(batchnorm_),
          init_seed(seed),
          enc1(3, w1, batchnorm_),
          enc2(w1, w2, batchnorm_),
          bottleneck(w2, wb, batchnorm_),
          dec2(w2 + wb, w2, batchnorm_),
          dec1(w1 + w2, w1, batchnorm_),
          head(w1, num_classes_, 1) {
        Rng rng(seed);
        enc1.init(rng);
        enc2.init(rng);
        bottleneck.init(rng);
        dec2.init(rng);
        dec1.init(rng);
        head.init(rng);
    }

    static void sigmoid_inplace(Tensor4<T>& x) {
        for (auto& v : x.d) v = T(1) / (T(1) + std::exp(-v));
    }

    // Probabilities, |C| x H x W per sample.
    Tensor4<T> forward(const Tensor4<T>& x, bool train) {
        if (x.h % 4 != 0 || x.w % 4 != 0) throw std::invalid_argument("input size must be divisible by 4");
        Tensor4<T> e1 = enc1.forward(x, train);
        Tensor4<T> p1 = pool1.forward(e1);
        Tensor4<T> e2 = enc2.forward(p1, train);
        Tensor4<T> p2 = pool2.forward(e2);
        Tensor4<T> bt = bottleneck.forward(p2, train);
        Tensor4<T> d2 = dec2.forward(concat_channels(e2, upsample_nearest2(bt)), train);
        Tensor4<T> d1 = dec1.forward(concat_channels(e1, upsample_nearest2(d2)), train);
        Tensor4<T> probs = head.forward(d1);
        sigmoid_inplace(probs);
        probs_cache = probs;
        return probs;
    }

    Tensor4<T> infer(const Tensor4<T>& x) const {
        if (x.h % 4 != 0 || x.w % 4 != 0) throw std::invalid_argument("input size must be divisible by 4");
        Tensor4<T> e1 = enc1.infer(x);
        MaxPool2<T> mp;
        Tensor4<T> e2 = enc2.infer(mp.forward(e1, false));
        Tensor4<T> bt = bottleneck.infer(mp.forward(e2, false));
        Tensor4<T> d2 = dec2.infer(concat_channels(e2, upsample_nearest2(bt)));
        Tensor4<T> d1 = dec1.infer(concat_channels(e1, upsample_nearest2(d2)));
        Tensor4<T> probs = head.apply(d1);
        sigmoid_inplace(probs);
        return probs;
    }

    // dprobs is the gradient wrt the output probabilities.
    Tensor4<T> backward(const Tensor4<T>& dprobs) {
        Tensor4<T> dlogits(dprobs.n, dprobs.c, dprobs.h, dprobs.w);
        for (std::size_t i = 0; i < dprobs.d.size(); ++i) {
            const T p = probs_cache.d[i];
            dlogits.d[i] = dprobs.d[i] * p * (T(1) - p);
        }
        Tensor4<T> g = head.backward(dlogits);
        g = dec1.backward(g);
        auto [de1_skip, du1] = split_channels(g, w1);
        g = dec2.backward(upsample_nearest2_backward(du1));
        auto [de2_skip, du2] = split_channels(g, w2);
        g = bottleneck.backward(upsample_nearest2_backward(du2));
        g = pool2.backward(g);
        for (std::size_t i = 0; i < g.d.size(); ++i) g.d[i] += de2_skip.d[i];
        g = enc2.backward(g);
        g = pool1.backward(g);
        for (std::size_t i = 0; i < g.d.size(); ++i) g.d[i] += de1_skip.d[i];
        return enc1.backward(g);
    }

    template <typename Fn>
    void for_each_param(Fn&& fn) {
        auto block = [&](const std::string& name, ConvBlock<T>& blk) {
            fn(name + ".conv1.w", blk.conv1.w, blk.conv1.gw);
            fn(name + ".conv1.b", blk.conv1.b, blk.conv1.gb);
            fn(name + ".conv2.w", blk.conv2.w, blk.conv2.gw);
            fn(name + ".conv2.b", blk.conv2.b, blk.conv2.gb);
            if (batchnorm) {
                fn(name + ".bn1.gamma", blk.bn1.gamma, blk.bn1.ggamma);
                fn(name + ".bn1.beta", blk.bn1.beta, blk.bn1.gbeta);
                fn(name + ".bn2.gamma", blk.bn2.gamma, blk.bn2.ggamma);
                fn(name + ".bn2.beta", blk.bn2.beta, blk.bn2.gbeta);
            }
        };
        block("enc1", enc1);
        block("enc2", enc2);
        block("bottleneck", bottleneck);
        block("dec2", dec2);
        block("dec1", dec1);
        fn("head.w", head.w, head.gw);
        fn("head.b", head.b, head.gb);
    }

    template <typename Fn>
    void for_each_buffer(Fn&& fn) {
        if (!batchnorm) return;
        auto block = [&](const std::string& name, ConvBlock<T>& blk) {
            fn(name + ".bn1.run_mean", blk.bn1.run_mean);
            fn(name + ".bn1.run_var", blk.bn1.run_var);
            fn(name + ".bn2.run_mean", blk.bn2.run_mean);
            fn(name + ".bn2.run_var", blk.bn2.run_var);
        };
        block("enc1", enc1);
        block("enc2", enc2);
        block("bottleneck", bottleneck);
        block("dec2", dec2);
        block("dec1", dec1);
    }

    void zero_grad() {
        for_each_param([](const std::string&, std::vector<T>& /*w*/, std::vector<T>& g) {
            std::fill(g.begin(), g.end(), T(0));
        });
    }

    // Caches are training scratch; dropping them keeps copies cheap.
    void drop_caches() {
        probs_cache = {};
        enc1.y1_cache = enc1.y2_cache = {};
        enc2.y1_cache = enc2.y2_cache = {};
        bottleneck.y1_cache = bottleneck.y2_cache = {};
        dec2.y1_cache = dec2.y2_cache = {};
        dec1.y1_cache = dec1.y2_cache = {};
        enc1.conv1.x_cache = enc1.conv2.x_cache = {};
        enc2.conv1.x_cache = enc2.conv2.x_cache = {};
        bottleneck.conv1.x_cache = bottleneck.conv2.x_cache = {};
        dec2.conv1.x_cache = dec2.conv2.x_cache = {};
        dec1.conv1.x_cache = dec1.conv2.x_cache = {};
        head.x_cache = {};
    }
};

// Adam with bias correction; state is keyed by parameter name.
template <typename T>
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long t = 0;
    std::vector<std::pair<std::vector<T>, std::vector<T>>> state;  // (m, v) per param, in visit order

    void step(SegNet<T>& net) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        std::size_t slot = 0;
        net.for_each_param([&](const std::string&, std::vector<T>& w, std::vector<T>& g) {
            if (slot >= state.size()) state.emplace_back(std::vector<T>(w.size(), T(0)), std::vector<T>(w.size(), T(0)));
            auto& [m, v] = state[slot++];
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[i] = static_cast<T>(beta1 * m[i] + (1.0 - beta1) * g[i]);
                v[i] = static_cast<T>(beta2 * v[i] + (1.0 - beta2) * static_cast<double>(g[i]) * g[i]);
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                w[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
            }
        });
    }
};

}  // namespace medood
