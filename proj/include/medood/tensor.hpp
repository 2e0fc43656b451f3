#pragma once

#include <cstddef>
#include <vector>

namespace medood {

// N x C x H x W, d[((n*c + ch)*h + y)*w + x].
template <typename T>
struct Tensor4 {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<T> d;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_), d(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
    T* sample(int i) { return d.data() + sample_size() * i; }
    const T* sample(int i) const { return d.data() + sample_size() * i; }

    T& at(int i, int ch, int y, int x) {
        return d[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }
    T at(int i, int ch, int y, int x) const {
        return d[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }
};

}  // namespace medood
