#pragma once

#include <cmath>
#include <vector>

#include "vsseg/nn/graph.hpp"

namespace vsseg::nn {

namespace detail {

inline int ceil_div(int a, int b) { return a > 0 ? (a + b - 1) / b : a / b; }

// Output index range [o0, o1) such that 0 <= o*stride - pad + k < in_size.
inline void conv_range(int in_size, int out_size, int stride, int pad, int k, int& o0, int& o1) {
    o0 = std::max(0, ceil_div(pad - k, stride));
    int hi = in_size - 1 + pad - k;
    o1 = hi < 0 ? 0 : std::min(out_size, hi / stride + 1);
    if (o1 < o0) o1 = o0;
}

}  // namespace detail

inline std::size_t conv_out_size(std::size_t in, int kernel, int stride, int pad) {
    return (in + 2 * static_cast<std::size_t>(pad) - kernel) / stride + 1;
}

// ---------------------------------------------------------------------------
// conv2d: x [Ci,H,W] * w [Co,Ci,kh,kw] (+ bias [Co]) -> [Co,Ho,Wo]
// ---------------------------------------------------------------------------

template <typename T>
void conv2d_value(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>* bias, int stride,
                  int pad, TensorT<T>& out) {
    const int ci_n = static_cast<int>(w.shape[1]);
    const int co_n = static_cast<int>(w.shape[0]);
    const int kh = static_cast<int>(w.shape[2]);
    const int kw = static_cast<int>(w.shape[3]);
    const int h = static_cast<int>(x.shape[1]);
    const int ww = static_cast<int>(x.shape[2]);
    const int ho = static_cast<int>(out.shape[1]);
    const int wo = static_cast<int>(out.shape[2]);

    for (int co = 0; co < co_n; ++co) {
        T* op = out.ptr() + static_cast<std::size_t>(co) * ho * wo;
        const T bv = bias ? (*bias)[co] : T(0);
        for (int i = 0; i < ho * wo; ++i) op[i] = bv;
        for (int ci = 0; ci < ci_n; ++ci) {
            const T* xp = x.ptr() + static_cast<std::size_t>(ci) * h * ww;
            const T* wp = w.ptr() + ((static_cast<std::size_t>(co) * ci_n + ci) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const T wv = wp[ky * kw + kx];
                    if (wv == T(0)) continue;
                    int oy0, oy1, ox0, ox1;
                    detail::conv_range(h, ho, stride, pad, ky, oy0, oy1);
                    detail::conv_range(ww, wo, stride, pad, kx, ox0, ox1);
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        const T* xrow = xp + static_cast<std::size_t>(iy) * ww + (ox0 * stride - pad + kx);
                        T* orow = op + static_cast<std::size_t>(oy) * wo + ox0;
                        const int n = ox1 - ox0;
                        if (stride == 1) {
                            for (int i = 0; i < n; ++i) orow[i] += wv * xrow[i];
                        } else {
                            for (int i = 0; i < n; ++i) orow[i] += wv * xrow[i * stride];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_grad_x(const TensorT<T>& w, const TensorT<T>& gout, int stride, int pad,
                   TensorT<T>& gx) {
    const int ci_n = static_cast<int>(w.shape[1]);
    const int co_n = static_cast<int>(w.shape[0]);
    const int kh = static_cast<int>(w.shape[2]);
    const int kw = static_cast<int>(w.shape[3]);
    const int h = static_cast<int>(gx.shape[1]);
    const int ww = static_cast<int>(gx.shape[2]);
    const int ho = static_cast<int>(gout.shape[1]);
    const int wo = static_cast<int>(gout.shape[2]);

    for (int co = 0; co < co_n; ++co) {
        const T* gp = gout.ptr() + static_cast<std::size_t>(co) * ho * wo;
        for (int ci = 0; ci < ci_n; ++ci) {
            T* dxp = gx.ptr() + static_cast<std::size_t>(ci) * h * ww;
            const T* wp = w.ptr() + ((static_cast<std::size_t>(co) * ci_n + ci) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const T wv = wp[ky * kw + kx];
                    if (wv == T(0)) continue;
                    int oy0, oy1, ox0, ox1;
                    detail::conv_range(h, ho, stride, pad, ky, oy0, oy1);
                    detail::conv_range(ww, wo, stride, pad, kx, ox0, ox1);
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        T* dxrow = dxp + static_cast<std::size_t>(iy) * ww + (ox0 * stride - pad + kx);
                        const T* grow = gp + static_cast<std::size_t>(oy) * wo + ox0;
                        const int n = ox1 - ox0;
                        if (stride == 1) {
                            for (int i = 0; i < n; ++i) dxrow[i] += wv * grow[i];
                        } else {
                            for (int i = 0; i < n; ++i) dxrow[i * stride] += wv * grow[i];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_grad_w(const TensorT<T>& x, const TensorT<T>& gout, int stride, int pad,
                   TensorT<T>& gw) {
    const int ci_n = static_cast<int>(gw.shape[1]);
    const int co_n = static_cast<int>(gw.shape[0]);
    const int kh = static_cast<int>(gw.shape[2]);
    const int kw = static_cast<int>(gw.shape[3]);
    const int h = static_cast<int>(x.shape[1]);
    const int ww = static_cast<int>(x.shape[2]);
    const int ho = static_cast<int>(gout.shape[1]);
    const int wo = static_cast<int>(gout.shape[2]);

    for (int co = 0; co < co_n; ++co) {
        const T* gp = gout.ptr() + static_cast<std::size_t>(co) * ho * wo;
        for (int ci = 0; ci < ci_n; ++ci) {
            const T* xp = x.ptr() + static_cast<std::size_t>(ci) * h * ww;
            T* wp = gw.ptr() + ((static_cast<std::size_t>(co) * ci_n + ci) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    int oy0, oy1, ox0, ox1;
                    detail::conv_range(h, ho, stride, pad, ky, oy0, oy1);
                    detail::conv_range(ww, wo, stride, pad, kx, ox0, ox1);
                    T acc = T(0);
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        const T* xrow = xp + static_cast<std::size_t>(iy) * ww + (ox0 * stride - pad + kx);
                        const T* grow = gp + static_cast<std::size_t>(oy) * wo + ox0;
                        const int n = ox1 - ox0;
                        if (stride == 1) {
                            for (int i = 0; i < n; ++i) acc += grow[i] * xrow[i];
                        } else {
                            for (int i = 0; i < n; ++i) acc += grow[i] * xrow[i * stride];
                        }
                    }
                    wp[ky * kw + kx] += acc;
                }
            }
        }
    }
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride = 1, int pad = 0) {
    if (x->value.rank() != 3 || w->value.rank() != 4 || x->value.shape[0] != w->value.shape[1])
        throw ShapeMismatch("conv2d: x " + shape_str(x->value.shape) + " w " +
                            shape_str(w->value.shape));
    TensorT<T> out({w->value.shape[0],
                    conv_out_size(x->value.shape[1], static_cast<int>(w->value.shape[2]), stride, pad),
                    conv_out_size(x->value.shape[2], static_cast<int>(w->value.shape[3]), stride, pad)});
    conv2d_value(x->value, w->value, bias ? &bias->value : nullptr, stride, pad, out);

    std::vector<Var<T>> parents = bias ? std::vector<Var<T>>{x, w, bias} : std::vector<Var<T>>{x, w};
    Node<T>* xn = x.get();
    Node<T>* wn = w.get();
    Node<T>* bn = bias ? bias.get() : nullptr;
    return make_node<T>(std::move(out), std::move(parents), [xn, wn, bn, stride, pad](Node<T>& self) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            conv2d_grad_x(wn->value, self.grad, stride, pad, xn->grad);
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
            conv2d_grad_w(xn->value, self.grad, stride, pad, wn->grad);
        }
        if (bn && bn->requires_grad) {
            bn->ensure_grad();
            const std::size_t plane = self.value.shape[1] * self.value.shape[2];
            for (std::size_t co = 0; co < self.value.shape[0]; ++co) {
                T acc = T(0);
                const T* gp = self.grad.ptr() + co * plane;
                for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
                bn->grad[co] += acc;
            }
        }
    });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, std::nullptr_t, int stride = 1, int pad = 0) {
    return conv2d(x, w, Var<T>{}, stride, pad);
}

// ---------------------------------------------------------------------------
// conv3d: x [Ci,F,H,W] * w [Co,Ci,kf,kh,kw] (+ bias) -> [Co,F,Ho,Wo], stride 1
// ---------------------------------------------------------------------------

template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int pad_f, int pad_hw) {
    if (x->value.rank() != 4 || w->value.rank() != 5 || x->value.shape[0] != w->value.shape[1])
        throw ShapeMismatch("conv3d: x " + shape_str(x->value.shape) + " w " +
                            shape_str(w->value.shape));
    const int ci_n = static_cast<int>(x->value.shape[0]);
    const int f_n = static_cast<int>(x->value.shape[1]);
    const int h = static_cast<int>(x->value.shape[2]);
    const int ww_ = static_cast<int>(x->value.shape[3]);
    const int co_n = static_cast<int>(w->value.shape[0]);
    const int kf = static_cast<int>(w->value.shape[2]);
    const int kh = static_cast<int>(w->value.shape[3]);
    const int kw = static_cast<int>(w->value.shape[4]);
    const int fo = static_cast<int>(conv_out_size(f_n, kf, 1, pad_f));
    const int ho = static_cast<int>(conv_out_size(h, kh, 1, pad_hw));
    const int wo = static_cast<int>(conv_out_size(ww_, kw, 1, pad_hw));

    TensorT<T> out({static_cast<std::size_t>(co_n), static_cast<std::size_t>(fo),
                    static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)});
    const auto& xv = x->value;
    const auto& wv_ = w->value;
    for (int co = 0; co < co_n; ++co) {
        const T bv = bias ? bias->value[co] : T(0);
        T* op = out.ptr() + static_cast<std::size_t>(co) * fo * ho * wo;
        for (int i = 0; i < fo * ho * wo; ++i) op[i] = bv;
        for (int ci = 0; ci < ci_n; ++ci) {
            for (int kff = 0; kff < kf; ++kff) {
                int of0, of1;
                detail::conv_range(f_n, fo, 1, pad_f, kff, of0, of1);
                for (int ky = 0; ky < kh; ++ky) {
                    int oy0, oy1;
                    detail::conv_range(h, ho, 1, pad_hw, ky, oy0, oy1);
                    for (int kx = 0; kx < kw; ++kx) {
                        int ox0, ox1;
                        detail::conv_range(ww_, wo, 1, pad_hw, kx, ox0, ox1);
                        const T wv = wv_.ptr()[(((static_cast<std::size_t>(co) * ci_n + ci) * kf + kff) * kh + ky) * kw + kx];
                        if (wv == T(0)) continue;
                        for (int of = of0; of < of1; ++of) {
                            const int iff = of - pad_f + kff;
                            for (int oy = oy0; oy < oy1; ++oy) {
                                const int iy = oy - pad_hw + ky;
                                const T* xrow = xv.ptr() +
                                                ((static_cast<std::size_t>(ci) * f_n + iff) * h + iy) * ww_ +
                                                (ox0 - pad_hw + kx);
                                T* orow = op + (static_cast<std::size_t>(of) * ho + oy) * wo + ox0;
                                for (int i = 0; i < ox1 - ox0; ++i) orow[i] += wv * xrow[i];
                            }
                        }
                    }
                }
            }
        }
    }

    std::vector<Var<T>> parents = bias ? std::vector<Var<T>>{x, w, bias} : std::vector<Var<T>>{x, w};
    Node<T>* xn = x.get();
    Node<T>* wn = w.get();
    Node<T>* bn = bias ? bias.get() : nullptr;
    return make_node<T>(std::move(out), std::move(parents),
                        [xn, wn, bn, pad_f, pad_hw, ci_n, f_n, h, ww_, co_n, kf, kh, kw, fo, ho,
                         wo](Node<T>& self) {
        const auto& g = self.grad;
        if (xn->requires_grad) xn->ensure_grad();
        if (wn->requires_grad) wn->ensure_grad();
        for (int co = 0; co < co_n; ++co) {
            const T* gp = g.ptr() + static_cast<std::size_t>(co) * fo * ho * wo;
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                T acc = T(0);
                for (int i = 0; i < fo * ho * wo; ++i) acc += gp[i];
                bn->grad[co] += acc;
            }
            for (int ci = 0; ci < ci_n; ++ci) {
                for (int kff = 0; kff < kf; ++kff) {
                    int of0, of1;
                    detail::conv_range(f_n, fo, 1, pad_f, kff, of0, of1);
                    for (int ky = 0; ky < kh; ++ky) {
                        int oy0, oy1;
                        detail::conv_range(h, ho, 1, pad_hw, ky, oy0, oy1);
                        for (int kx = 0; kx < kw; ++kx) {
                            int ox0, ox1;
                            detail::conv_range(ww_, wo, 1, pad_hw, kx, ox0, ox1);
                            const std::size_t widx =
                                (((static_cast<std::size_t>(co) * ci_n + ci) * kf + kff) * kh + ky) * kw + kx;
                            const T wv = wn->value[widx];
                            T wacc = T(0);
                            for (int of = of0; of < of1; ++of) {
                                const int iff = of - pad_f + kff;
                                for (int oy = oy0; oy < oy1; ++oy) {
                                    const int iy = oy - pad_hw + ky;
                                    const std::size_t xoff =
                                        ((static_cast<std::size_t>(ci) * f_n + iff) * h + iy) * ww_ +
                                        (ox0 - pad_hw + kx);
                                    const T* grow = gp + (static_cast<std::size_t>(of) * ho + oy) * wo + ox0;
                                    const int n = ox1 - ox0;
                                    if (xn->requires_grad) {
                                        T* dxrow = xn->grad.ptr() + xoff;
                                        for (int i = 0; i < n; ++i) dxrow[i] += wv * grow[i];
                                    }
                                    if (wn->requires_grad) {
                                        const T* xrow = xn->value.ptr() + xoff;
                                        for (int i = 0; i < n; ++i) wacc += grow[i] * xrow[i];
                                    }
                                }
                            }
                            if (wn->requires_grad) wn->grad[widx] += wacc;
                        }
                    }
                }
            }
        }
    });
}

template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, std::nullptr_t, int pad_f, int pad_hw) {
    return conv3d(x, w, Var<T>{}, pad_f, pad_hw);
}

// ---------------------------------------------------------------------------
// Pointwise ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw ShapeMismatch("add");
    TensorT<T> out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    Node<T>* an = a.get();
    Node<T>* bn = b.get();
    return make_node<T>(std::move(out), {a, b}, [an, bn](Node<T>& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.numel(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.numel(); ++i) bn->grad[i] += self.grad[i];
        }
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw ShapeMismatch("mul");
    TensorT<T> out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    Node<T>* an = a.get();
    Node<T>* bn = b.get();
    return make_node<T>(std::move(out), {a, b}, [an, bn](Node<T>& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.numel(); ++i)
                an->grad[i] += self.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.numel(); ++i)
                bn->grad[i] += self.grad[i] * an->value[i];
        }
    });
}

// a + c*b, used for the ConvGRU convex update and loss composition.
template <typename T>
Var<T> axpy(const Var<T>& a, T c, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw ShapeMismatch("axpy");
    TensorT<T> out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += c * b->value[i];
    Node<T>* an = a.get();
    Node<T>* bn = b.get();
    return make_node<T>(std::move(out), {a, b}, [an, bn, c](Node<T>& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.numel(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.numel(); ++i) bn->grad[i] += c * self.grad[i];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T c) {
    TensorT<T> out = a->value;
    for (auto& v : out.data) v *= c;
    Node<T>* an = a.get();
    return make_node<T>(std::move(out), {a}, [an, c](Node<T>& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) an->grad[i] += c * self.grad[i];
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
    TensorT<T> out = a->value;
    for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    Node<T>* an = a.get();
    return make_node<T>(std::move(out), {a}, [an](Node<T>& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            const T y = self.value[i];
            an->grad[i] += self.grad[i] * y * (T(1) - y);
        }
    });
}

template <typename T>
Var<T> tanh_op(const Var<T>& a) {
    TensorT<T> out = a->value;
    for (auto& v : out.data) v = std::tanh(v);
    Node<T>* an = a.get();
    return make_node<T>(std::move(out), {a}, [an](Node<T>& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            const T y = self.value[i];
            an->grad[i] += self.grad[i] * (T(1) - y * y);
        }
    });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
    TensorT<T> out = a->value;
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    Node<T>* an = a.get();
    return make_node<T>(std::move(out), {a}, [an](Node<T>& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            if (self.value[i] > T(0)) an->grad[i] += self.grad[i];
        }
    });
}

// (1 - z) * h + z * g: the gated convex combination in one node.
template <typename T>
Var<T> gated_blend(const Var<T>& z, const Var<T>& h, const Var<T>& g) {
    if (!z->value.same_shape(h->value) || !z->value.same_shape(g->value))
        throw ShapeMismatch("gated_blend");
    TensorT<T> out = z->value;
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = (T(1) - z->value[i]) * h->value[i] + z->value[i] * g->value[i];
    Node<T>* zn = z.get();
    Node<T>* hn = h.get();
    Node<T>* gn = g.get();
    return make_node<T>(std::move(out), {z, h, g}, [zn, hn, gn](Node<T>& self) {
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            const T gi = self.grad[i];
            if (zn->requires_grad) {
                zn->ensure_grad();
                zn->grad[i] += gi * (gn->value[i] - hn->value[i]);
            }
            if (hn->requires_grad) {
                hn->ensure_grad();
                hn->grad[i] += gi * (T(1) - zn->value[i]);
            }
            if (gn->requires_grad) {
                gn->ensure_grad();
                gn->grad[i] += gi * zn->value[i];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Structure ops
// ---------------------------------------------------------------------------

// Concatenation along the channel axis (dim 0 of [C,H,W]).
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw Error("concat_channels: empty");
    std::size_t c_total = 0;
    for (const auto& x : xs) {
        if (x->value.rank() != 3 || x->value.shape[1] != xs[0]->value.shape[1] ||
            x->value.shape[2] != xs[0]->value.shape[2])
            throw ShapeMismatch("concat_channels");
        c_total += x->value.shape[0];
    }
    TensorT<T> out({c_total, xs[0]->value.shape[1], xs[0]->value.shape[2]});
    std::size_t off = 0;
    for (const auto& x : xs) {
        std::copy(x->value.data.begin(), x->value.data.end(), out.data.begin() + off);
        off += x->value.numel();
    }
    std::vector<Node<T>*> raw;
    for (const auto& x : xs) raw.push_back(x.get());
    return make_node<T>(std::move(out), xs, [raw](Node<T>& self) {
        std::size_t off = 0;
        for (Node<T>* x : raw) {
            const std::size_t n = x->value.numel();
            if (x->requires_grad) {
                x->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) x->grad[i] += self.grad[off + i];
            }
            off += n;
        }
    });
}

// Softmax over the channel axis of [C,H,W].
template <typename T>
Var<T> softmax_channels(const Var<T>& x) {
    const std::size_t c = x->value.shape[0];
    const std::size_t plane = x->value.shape[1] * x->value.shape[2];
    TensorT<T> out(x->value.shape);
    for (std::size_t p = 0; p < plane; ++p) {
        T m = x->value[p];
        for (std::size_t k = 1; k < c; ++k) m = std::max(m, x->value[k * plane + p]);
        T denom = T(0);
        for (std::size_t k = 0; k < c; ++k) {
            const T e = std::exp(x->value[k * plane + p] - m);
            out[k * plane + p] = e;
            denom += e;
        }
        for (std::size_t k = 0; k < c; ++k) out[k * plane + p] /= denom;
    }
    Node<T>* xn = x.get();
    return make_node<T>(std::move(out), {x}, [xn, c, plane](Node<T>& self) {
        xn->ensure_grad();
        for (std::size_t p = 0; p < plane; ++p) {
            T dot = T(0);
            for (std::size_t k = 0; k < c; ++k)
                dot += self.grad[k * plane + p] * self.value[k * plane + p];
            for (std::size_t k = 0; k < c; ++k) {
                const T y = self.value[k * plane + p];
                xn->grad[k * plane + p] += y * (self.grad[k * plane + p] - dot);
            }
        }
    });
}

// 2x2 max pooling, stride 2. Requires even spatial dims.
template <typename T>
Var<T> maxpool2(const Var<T>& x) {
    const std::size_t c = x->value.shape[0];
    const std::size_t h = x->value.shape[1];
    const std::size_t w = x->value.shape[2];
    if (h % 2 || w % 2) throw ShapeMismatch("maxpool2: odd spatial dims " + shape_str(x->value.shape));
    TensorT<T> out({c, h / 2, w / 2});
    auto idx = std::make_shared<std::vector<std::uint32_t>>(out.numel());
    for (std::size_t ci = 0; ci < c; ++ci) {
        const T* xp = x->value.ptr() + ci * h * w;
        T* op = out.ptr() + ci * (h / 2) * (w / 2);
        std::uint32_t* ip = idx->data() + ci * (h / 2) * (w / 2);
        for (std::size_t y = 0; y < h / 2; ++y) {
            for (std::size_t xx = 0; xx < w / 2; ++xx) {
                const std::size_t base = (2 * y) * w + 2 * xx;
                std::size_t best = base;
                T bv = xp[base];
                const std::size_t cands[3] = {base + 1, base + w, base + w + 1};
                for (std::size_t cand : cands) {
                    if (xp[cand] > bv) {
                        bv = xp[cand];
                        best = cand;
                    }
                }
                op[y * (w / 2) + xx] = bv;
                ip[y * (w / 2) + xx] = static_cast<std::uint32_t>(best);
            }
        }
    }
    Node<T>* xn = x.get();
    const std::size_t plane_in = h * w;
    const std::size_t plane_out = (h / 2) * (w / 2);
    return make_node<T>(std::move(out), {x}, [xn, idx, c, plane_in, plane_out](Node<T>& self) {
        xn->ensure_grad();
        for (std::size_t ci = 0; ci < c; ++ci) {
            T* dx = xn->grad.ptr() + ci * plane_in;
            const T* g = self.grad.ptr() + ci * plane_out;
            const std::uint32_t* ip = idx->data() + ci * plane_out;
            for (std::size_t i = 0; i < plane_out; ++i) dx[ip[i]] += g[i];
        }
    });
}

// Nearest-neighbor 2x upsampling.
template <typename T>
Var<T> upsample_nearest2(const Var<T>& x) {
    const std::size_t c = x->value.shape[0];
    const std::size_t h = x->value.shape[1];
    const std::size_t w = x->value.shape[2];
    TensorT<T> out({c, 2 * h, 2 * w});
    for (std::size_t ci = 0; ci < c; ++ci) {
        const T* xp = x->value.ptr() + ci * h * w;
        T* op = out.ptr() + ci * 4 * h * w;
        for (std::size_t y = 0; y < 2 * h; ++y) {
            const T* xrow = xp + (y / 2) * w;
            T* orow = op + y * 2 * w;
            for (std::size_t xx = 0; xx < 2 * w; ++xx) orow[xx] = xrow[xx / 2];
        }
    }
    Node<T>* xn = x.get();
    return make_node<T>(std::move(out), {x}, [xn, c, h, w](Node<T>& self) {
        xn->ensure_grad();
        for (std::size_t ci = 0; ci < c; ++ci) {
            T* dx = xn->grad.ptr() + ci * h * w;
            const T* g = self.grad.ptr() + ci * 4 * h * w;
            for (std::size_t y = 0; y < 2 * h; ++y) {
                T* dxrow = dx + (y / 2) * w;
                const T* grow = g + y * 2 * w;
                for (std::size_t xx = 0; xx < 2 * w; ++xx) dxrow[xx / 2] += grow[xx];
            }
        }
    });
}

// Elementwise max over a stack of same-shape tensors (sequence global max
// pooling). Ties resolve to the earliest frame.
template <typename T>
Var<T> max_over(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw Error("max_over: empty");
    const std::size_t n = xs[0]->value.numel();
    TensorT<T> out = xs[0]->value;
    auto winner = std::make_shared<std::vector<std::uint16_t>>(n, 0);
    for (std::size_t t = 1; t < xs.size(); ++t) {
        if (!xs[t]->value.same_shape(out)) throw ShapeMismatch("max_over");
        const T* xp = xs[t]->value.ptr();
        for (std::size_t i = 0; i < n; ++i) {
            if (xp[i] > out[i]) {
                out[i] = xp[i];
                (*winner)[i] = static_cast<std::uint16_t>(t);
            }
        }
    }
    std::vector<Node<T>*> raw;
    for (const auto& x : xs) raw.push_back(x.get());
    return make_node<T>(std::move(out), xs, [raw, winner, n](Node<T>& self) {
        for (Node<T>* x : raw)
            if (x->requires_grad) x->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
            Node<T>* x = raw[(*winner)[i]];
            if (x->requires_grad) x->grad[i] += self.grad[i];
        }
    });
}

// Mean over all elements -> scalar [1].
template <typename T>
Var<T> mean_all(const Var<T>& x) {
    const std::size_t n = x->value.numel();
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x->value[i];
    TensorT<T> out({1});
    out[0] = acc / static_cast<T>(n);
    Node<T>* xn = x.get();
    return make_node<T>(std::move(out), {x}, [xn, n](Node<T>& self) {
        xn->ensure_grad();
        const T g = self.grad[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) xn->grad[i] += g;
    });
}

}  // namespace vsseg::nn
