#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "irp/tape.hpp"
#include "irp/tensor.hpp"

namespace irp {

enum class LossKind { bce, precision, sum };

inline std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::bce: return "bce";
        case LossKind::precision: return "precision";
        case LossKind::sum: return "sum";
    }
    return "bce";
}

struct LossConfig {
    LossKind kind = LossKind::bce;
    double alpha = 1.0;   // weight on the BCE term
    double beta_w = 1.0;  // weight on the precision term
    double epsilon = 1e-7;

    void validate() const {
        if (alpha < 0.0 || beta_w < 0.0 || epsilon <= 0.0)
            throw std::invalid_argument("LossConfig: weights must be >= 0 and epsilon > 0");
        if (kind == LossKind::sum && alpha + beta_w <= 0.0)
            throw std::invalid_argument("LossConfig: sum loss needs alpha + beta_w > 0");
    }
};

namespace detail {
inline void check_labels(std::span<const double> p, std::span<const int> y, const char* op) {
    if (p.size() != y.size()) throw std::invalid_argument(std::string(op) + ": length mismatch");
    for (int v : y)
        if (v != 0 && v != 1) throw std::invalid_argument(std::string(op) + ": label not in {0,1}");
}
} // namespace detail

// --- plain (non-differentiable-path) evaluations ----------------------------

/// Mean binary cross-entropy with probabilities clamped to [eps, 1-eps].
inline double bce_loss(std::span<const double> p, std::span<const int> y, double eps = 1e-7) {
    detail::check_labels(p, y, "bce_loss");
    if (p.empty()) throw std::invalid_argument("bce_loss: empty batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double pc = p[i];
        if (pc < eps) pc = eps;
        else if (pc > 1.0 - eps) pc = 1.0 - eps;
        const double yi = static_cast<double>(y[i]);
        sum += -(yi * std::log(pc) + (1.0 - yi) * std::log(1.0 - pc));
    }
    return sum / static_cast<double>(p.size());
}

/// 1 - softTP / (softTP + softFP + eps), with soft counts from the sigmoid
/// outputs. Computed over the whole batch it was given.
inline double precision_loss(std::span<const double> y_hat, std::span<const int> y, double eps = 1e-7) {
    detail::check_labels(y_hat, y, "precision_loss");
    if (y_hat.empty()) throw std::invalid_argument("precision_loss: empty batch");
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < y_hat.size(); ++i) {
        tp += y_hat[i] * static_cast<double>(y[i]);
        fp += y_hat[i] * (1.0 - static_cast<double>(y[i]));
    }
    return 1.0 - tp / (tp + fp + eps);
}

inline double combined_loss(std::span<const double> p, std::span<const int> y, const LossConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
        case LossKind::bce: return bce_loss(p, y, cfg.epsilon);
        case LossKind::precision: return precision_loss(p, y, cfg.epsilon);
        case LossKind::sum: break;
    }
    if (cfg.beta_w == 0.0) return cfg.alpha == 1.0 ? bce_loss(p, y, cfg.epsilon)
                                                   : cfg.alpha * bce_loss(p, y, cfg.epsilon);
    if (cfg.alpha == 0.0) return cfg.beta_w == 1.0 ? precision_loss(p, y, cfg.epsilon)
                                                   : cfg.beta_w * precision_loss(p, y, cfg.epsilon);
    return cfg.alpha * bce_loss(p, y, cfg.epsilon) + cfg.beta_w * precision_loss(p, y, cfg.epsilon);
}

// --- tape versions, for training -------------------------------------------

/// probs: [B x 1] column of model outputs.
inline Value bce_loss_on_tape(Tape& tape, Value probs, const std::vector<int>& y, double eps = 1e-7) {
    if (probs.val().numel() != y.size()) throw std::invalid_argument("bce_loss: length mismatch");
    std::vector<double> yd(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 0 && y[i] != 1) throw std::invalid_argument("bce_loss: label not in {0,1}");
        yd[i] = static_cast<double>(y[i]);
    }
    Value Y = tape.constant(Tensor::column(yd));
    Value pc = tape.clamp(probs, eps, 1.0 - eps);
    Value term = tape.add(tape.mul(Y, tape.log(pc)),
                          tape.mul(tape.one_minus(Y), tape.log(tape.one_minus(pc))));
    return tape.scale(tape.mean_all(term), -1.0);
}

inline Value precision_loss_on_tape(Tape& tape, Value y_hat, const std::vector<int>& y, double eps = 1e-7) {
    if (y_hat.val().numel() != y.size()) throw std::invalid_argument("precision_loss: length mismatch");
    std::vector<double> yd(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 0 && y[i] != 1) throw std::invalid_argument("precision_loss: label not in {0,1}");
        yd[i] = static_cast<double>(y[i]);
    }
    Value Y = tape.constant(Tensor::column(yd));
    Value tp = tape.sum_all(tape.mul(Y, y_hat));
    Value fp = tape.sum_all(tape.mul(tape.one_minus(Y), y_hat));
    Value denom = tape.add_scalar(tape.add(tp, fp), eps);
    return tape.one_minus(tape.div(tp, denom));
}

inline Value combined_loss_on_tape(Tape& tape, Value probs, const std::vector<int>& y,
                                   const LossConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
        case LossKind::bce: return bce_loss_on_tape(tape, probs, y, cfg.epsilon);
        case LossKind::precision: return precision_loss_on_tape(tape, probs, y, cfg.epsilon);
        case LossKind::sum: break;
    }
    if (cfg.beta_w == 0.0) {
        Value b = bce_loss_on_tape(tape, probs, y, cfg.epsilon);
        return cfg.alpha == 1.0 ? b : tape.scale(b, cfg.alpha);
    }
    if (cfg.alpha == 0.0) {
        Value p = precision_loss_on_tape(tape, probs, y, cfg.epsilon);
        return cfg.beta_w == 1.0 ? p : tape.scale(p, cfg.beta_w);
    }
    return tape.add(tape.scale(bce_loss_on_tape(tape, probs, y, cfg.epsilon), cfg.alpha),
                    tape.scale(precision_loss_on_tape(tape, probs, y, cfg.epsilon), cfg.beta_w));
}

// --- hard metrics ------------------------------------------------------------

struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Hard counts at a threshold; prediction = 1 iff p >= threshold.
inline ConfusionCounts confusion(std::span<const double> p, std::span<const int> y, double threshold) {
    detail::check_labels(p, y, "confusion");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("confusion: threshold must be in (0,1)");
    ConfusionCounts c;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pred = p[i] >= threshold;
        if (pred && y[i] == 1) ++c.tp;
        else if (pred && y[i] == 0) ++c.fp;
        else if (!pred && y[i] == 1) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline double precision(const ConfusionCounts& c) {
    const auto denom = c.tp + c.fp;
    return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double recall(const ConfusionCounts& c) {
    const auto denom = c.tp + c.fn;
    return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

/// F_beta = (1 + beta^2) P R / (beta^2 P + R); 0 when the denominator is 0.
inline double f_beta(double p, double r, double beta_f = 0.5) {
    const double b2 = beta_f * beta_f;
    const double denom = b2 * p + r;
    return denom == 0.0 ? 0.0 : (1.0 + b2) * p * r / denom;
}

inline double f_beta(const ConfusionCounts& c, double beta_f = 0.5) {
    return f_beta(precision(c), recall(c), beta_f);
}

} // namespace irp
