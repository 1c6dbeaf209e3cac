#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "irp/tensor.hpp"

namespace irp {

/// AdamW: Adam with decoupled weight decay. The decay term is applied to the
/// parameter directly, not folded into the gradient.
struct AdamWConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    const AdamWConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return t_; }

    void step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
        if (params.size() != grads.size())
            throw std::invalid_argument("AdamW::step: params/grads size mismatch");
        if (m_.empty()) {
            m_.reserve(params.size());
            v_.reserve(params.size());
            for (Tensor* p : params) {
                m_.push_back(Tensor::zeros(p->shape()));
                v_.push_back(Tensor::zeros(p->shape()));
            }
        }
        if (m_.size() != params.size())
            throw std::invalid_argument("AdamW::step: parameter count changed");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            const Tensor& g = grads[i];
            if (!p.same_shape(g))
                throw std::invalid_argument("AdamW::step: gradient shape mismatch");
            if (!g.all_finite())
                throw std::runtime_error("AdamW::step: non-finite gradient");
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (std::size_t j = 0; j < p.numel(); ++j) {
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] -= cfg_.learning_rate * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p[j]);
            }
        }
    }

private:
    AdamWConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::int64_t t_ = 0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_coord = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Central-difference gradient check. `f` must be deterministic (dropout
/// off). `coords` point at the parameter entries to probe; `analytic` holds
/// the corresponding backward-pass gradients.
inline GradCheckReport grad_check(const std::function<double()>& f,
                                  std::span<double* const> coords,
                                  std::span<const double> analytic,
                                  double h = 1e-5) {
    if (coords.size() != analytic.size())
        throw std::invalid_argument("grad_check: coords/analytic size mismatch");
    GradCheckReport rep;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        double* c = coords[i];
        const double x0 = *c;
        *c = x0 + h;
        const double fp = f();
        *c = x0 - h;
        const double fm = f();
        *c = x0;
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic[i];
        const double rel = std::fabs(a - numeric) / (std::fabs(a) + std::fabs(numeric) + 1e-8);
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_coord = i;
            rep.worst_analytic = a;
            rep.worst_numeric = numeric;
        }
    }
    return rep;
}

} // namespace irp
