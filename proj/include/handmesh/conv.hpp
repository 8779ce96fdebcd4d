#pragma once

#include "handmesh/tensor.hpp"

namespace handmesh {

namespace detail {

// Unpack x[C,H,W] into col[C*kh*kw, Ho*Wo] (cross-correlation layout).
template <typename T>
void im2col(const T* x, std::size_t c, std::size_t h, std::size_t w,
            std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
            std::size_t ho, std::size_t wo, T* col) {
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ki = 0; ki < kh; ++ki)
            for (std::size_t kj = 0; kj < kw; ++kj) {
                T* dst = col + ((ch * kh + ki) * kw + kj) * ho * wo;
                for (std::size_t oi = 0; oi < ho; ++oi) {
                    const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * stride + ki) -
                                              static_cast<std::ptrdiff_t>(pad);
                    for (std::size_t oj = 0; oj < wo; ++oj) {
                        const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * stride + kj) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        T v = 0;
                        if (ii >= 0 && jj >= 0 && ii < static_cast<std::ptrdiff_t>(h) &&
                            jj < static_cast<std::ptrdiff_t>(w))
                            v = x[(ch * h + static_cast<std::size_t>(ii)) * w + static_cast<std::size_t>(jj)];
                        dst[oi * wo + oj] = v;
                    }
                }
            }
}

// Scatter-add of the col gradient back onto the input image.
template <typename T>
void col2im_acc(const T* col, std::size_t c, std::size_t h, std::size_t w,
                std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
                std::size_t ho, std::size_t wo, T* gx) {
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ki = 0; ki < kh; ++ki)
            for (std::size_t kj = 0; kj < kw; ++kj) {
                const T* src = col + ((ch * kh + ki) * kw + kj) * ho * wo;
                for (std::size_t oi = 0; oi < ho; ++oi) {
                    const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * stride + ki) -
                                              static_cast<std::ptrdiff_t>(pad);
                    if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t oj = 0; oj < wo; ++oj) {
                        const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * stride + kj) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
                        gx[(ch * h + static_cast<std::size_t>(ii)) * w + static_cast<std::size_t>(jj)] +=
                            src[oi * wo + oj];
                    }
                }
            }
}

} // namespace detail

// 2-d convolution in the cross-correlation convention (no kernel flip).
// x: [C_in, H, W], w: [C_out, C_in, k, k], optional bias [C_out].
template <typename T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> w, Tensor<T> bias,
                 std::size_t stride, std::size_t pad) {
    if (x.ndim() != 3 || w.ndim() != 4)
        throw ShapeError("conv2d: need x[C,H,W] and w[Cout,Cin,k,k]");
    if (w.dim(1) != x.dim(0))
        throw ShapeError("conv2d: channel mismatch, input has " + std::to_string(x.dim(0)) +
                         ", kernel expects " + std::to_string(w.dim(1)));
    if (w.dim(2) != w.dim(3)) throw ShapeError("conv2d: only square kernels supported");
    if (stride == 0) throw ContractError("conv2d: stride must be positive");
    const std::size_t cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
    const std::size_t cout = w.dim(0), k = w.dim(2);
    if (h + 2 * pad < k || ww + 2 * pad < k) throw ShapeError("conv2d: kernel larger than padded input");
    const std::size_t ho = (h + 2 * pad - k) / stride + 1;
    const std::size_t wo = (ww + 2 * pad - k) / stride + 1;
    const bool has_bias = bias.defined();
    if (has_bias && (bias.ndim() != 1 || bias.dim(0) != cout))
        throw ShapeError("conv2d: bias must be [Cout]");

    std::vector<T> col(cin * k * k * ho * wo);
    detail::im2col(x.values().data(), cin, h, ww, k, k, stride, pad, ho, wo, col.data());
    std::vector<T> out(cout * ho * wo, T(0));
    // out = Wmat[cout, cin*k*k] * col
    detail::gemm_acc(w.values().data(), col.data(), out.data(), cout, cin * k * k, ho * wo);
    if (has_bias) {
        const auto& bv = bias.values();
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t i = 0; i < ho * wo; ++i) out[co * ho * wo + i] += bv[co];
    }

    std::vector<Tensor<T>> parents = has_bias ? std::vector<Tensor<T>>{x, w, bias}
                                              : std::vector<Tensor<T>>{x, w};
    return Tensor<T>::make_op("conv2d", Shape{cout, ho, wo}, std::move(out), std::move(parents),
        [x, w, bias, has_bias, stride, pad, cin, h, ww, cout, k, ho, wo,
         col = std::move(col)](const typename Tensor<T>::Node& self) mutable {
            const std::size_t ckk = cin * k * k;
            if (w.needs_grad()) { // dW = dOut * col^T
                Tensor<T>::ensure_grad(*w.node_);
                detail::gemm_bt_acc(self.grad.data(), col.data(), w.grad().data(), cout, ho * wo, ckk);
            }
            if (x.needs_grad()) { // dcol = W^T * dOut, then scatter
                Tensor<T>::ensure_grad(*x.node_);
                std::vector<T> dcol(ckk * ho * wo, T(0));
                detail::gemm_at_acc(w.values().data(), self.grad.data(), dcol.data(), cout, ckk, ho * wo);
                detail::col2im_acc(dcol.data(), cin, h, ww, k, k, stride, pad, ho, wo, x.grad().data());
            }
            if (has_bias && bias.needs_grad()) {
                Tensor<T>::ensure_grad(*bias.node_);
                auto& g = bias.grad();
                for (std::size_t co = 0; co < cout; ++co) {
                    T acc = 0;
                    for (std::size_t i = 0; i < ho * wo; ++i) acc += self.grad[co * ho * wo + i];
                    g[co] += acc;
                }
            }
        });
}

template <typename T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> w, std::size_t stride, std::size_t pad) {
    return conv2d(x, w, Tensor<T>{}, stride, pad);
}

// Nearest-neighbor 2x upsampling of [C,H,W].
template <typename T>
Tensor<T> upsample2x_nearest(Tensor<T> x) {
    if (x.ndim() != 3) throw ShapeError("upsample2x_nearest: need [C,H,W]");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    std::vector<T> out(c * 4 * h * w);
    const auto& xv = x.values();
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const T v = xv[(ch * h + i) * w + j];
                const std::size_t base = (ch * 2 * h + 2 * i) * 2 * w + 2 * j;
                out[base] = v;
                out[base + 1] = v;
                out[base + 2 * w] = v;
                out[base + 2 * w + 1] = v;
            }
    return Tensor<T>::make_op("upsample2x", Shape{c, 2 * h, 2 * w}, std::move(out), {x},
        [x, c, h, w](const typename Tensor<T>::Node& self) mutable {
            if (!x.needs_grad()) return;
            Tensor<T>::ensure_grad(*x.node_);
            auto& g = x.grad();
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j) {
                        const std::size_t base = (ch * 2 * h + 2 * i) * 2 * w + 2 * j;
                        g[(ch * h + i) * w + j] += self.grad[base] + self.grad[base + 1] +
                                                   self.grad[base + 2 * w] + self.grad[base + 2 * w + 1];
                    }
        });
}

// Spatial mean per channel: [C,H,W] -> [C].
template <typename T>
Tensor<T> global_avg_pool(Tensor<T> x) {
    if (x.ndim() != 3) throw ShapeError("global_avg_pool: need [C,H,W]");
    const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    std::vector<T> out(c, T(0));
    const auto& xv = x.values();
    for (std::size_t ch = 0; ch < c; ++ch) {
        T acc = 0;
        for (std::size_t i = 0; i < hw; ++i) acc += xv[ch * hw + i];
        out[ch] = acc / static_cast<T>(hw);
    }
    return Tensor<T>::make_op("global_avg_pool", Shape{c}, std::move(out), {x},
        [x, c, hw](const typename Tensor<T>::Node& self) mutable {
            if (!x.needs_grad()) return;
            Tensor<T>::ensure_grad(*x.node_);
            auto& g = x.grad();
            const T inv = T(1) / static_cast<T>(hw);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T gv = self.grad[ch] * inv;
                for (std::size_t i = 0; i < hw; ++i) g[ch * hw + i] += gv;
            }
        });
}

} // namespace handmesh
