#pragma once

#include <cmath>
#include <vector>

#include "handmesh/params.hpp"

namespace handmesh {

// Adam with bias correction. The learning-rate schedule is applied externally
// through set_lr(); gradients must be zeroed explicitly between steps.
template <typename T>
class Adam {
public:
    Adam(ParamSet<T>& params, double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto& [name, t] : params_.entries()) {
            m_.emplace_back(t.numel(), T(0));
            v_.emplace_back(t.numel(), T(0));
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long step_count() const { return t_; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        std::size_t idx = 0;
        for (auto& [name, p] : params_.entries()) {
            auto& val = p.values();
            const auto& g = p.grad();
            auto& m = m_[idx];
            auto& v = v_[idx];
            if (g.size() != val.size())
                throw ShapeError("adam: grad/param size mismatch for " + name);
            for (std::size_t i = 0; i < val.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                m[i] = static_cast<T>(beta1_ * m[i] + (1.0 - beta1_) * gi);
                v[i] = static_cast<T>(beta2_ * v[i] + (1.0 - beta2_) * gi * gi);
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                val[i] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
            ++idx;
        }
    }

    void zero_grad() { params_.zero_grad(); }

private:
    ParamSet<T>& params_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

} // namespace handmesh
