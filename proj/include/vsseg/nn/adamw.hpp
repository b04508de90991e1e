#pragma once

#include <cmath>
#include <vector>

#include "vsseg/nn/graph.hpp"

namespace vsseg::nn {

// Adam with decoupled weight decay. Gradients accumulate on the parameter
// leaves; step() consumes them, zero_grad() clears them.
template <typename T>
class AdamW {
public:
    struct Options {
        double lr = 5e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 1e-4;
    };

    AdamW(std::vector<Var<T>> params, Options opts = {})
        : params_(std::move(params)), opts_(opts) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto& p : params_) {
            m_.emplace_back(p->value.shape, T(0));
            v_.emplace_back(p->value.shape, T(0));
        }
    }

    void set_lr(double lr) { opts_.lr = lr; }
    double lr() const { return opts_.lr; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(opts_.beta1, t_);
        const double bc2 = 1.0 - std::pow(opts_.beta2, t_);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = *params_[k];
            if (p.grad.data.empty()) continue;
            T* w = p.value.ptr();
            const T* g = p.grad.ptr();
            T* m = m_[k].ptr();
            T* v = v_[k].ptr();
            for (std::size_t i = 0; i < p.value.numel(); ++i) {
                m[i] = static_cast<T>(opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i]);
                v[i] = static_cast<T>(opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i]);
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                w[i] -= static_cast<T>(opts_.lr * (mhat / (std::sqrt(vhat) + opts_.eps) +
                                                   opts_.weight_decay * w[i]));
            }
        }
    }

    void zero_grad() {
        for (const auto& p : params_) p->zero_grad();
    }

private:
    std::vector<Var<T>> params_;
    Options opts_;
    std::vector<TensorT<T>> m_, v_;
    long t_ = 0;
};

// Cosine annealing from base_lr to ~0 over total_epochs.
inline double cosine_lr(double base_lr, int epoch, int total_epochs) {
    if (total_epochs <= 1) return base_lr;
    const double x = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(1.0, x)));
}

}  // namespace vsseg::nn
