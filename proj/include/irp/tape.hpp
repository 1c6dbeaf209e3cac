#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "irp/rng.hpp"
#include "irp/tensor.hpp"

namespace irp {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; the tensor it refers to lives
/// in the tape arena.
struct Value {
    Tape* tape = nullptr;
    std::uint32_t id = 0;

    const Tensor& val() const;
    std::size_t rows() const { return val().rows(); }
    std::size_t cols() const { return val().cols(); }
    double item() const { return val().item(); }
};

/// Records a forward computation as a topologically ordered list of nodes,
/// each with a backward rule that accumulates gradients into its inputs.
/// Gradients sum across fan-out. One backward pass per recording.
class Tape {
public:
    Value leaf(Tensor v, bool requires_grad = false) {
        return push(std::move(v), requires_grad, nullptr);
    }

    Value constant(Tensor v) { return leaf(std::move(v), false); }
    Value constant(double v) { return leaf(Tensor::scalar(v), false); }

    const Tensor& value(Value v) const { return nodes_[v.id].value; }

    /// Gradient of the last backward()'s root with respect to node v.
    const Tensor& grad(Value v) const {
        if (!backward_done_) throw std::logic_error("Tape::grad: backward has not run");
        if (!nodes_[v.id].requires_grad)
            throw std::logic_error("Tape::grad: node does not require gradients");
        return nodes_[v.id].grad;
    }

    std::size_t size() const { return nodes_.size(); }

    // --- elementwise -------------------------------------------------------

    Value add(Value a, Value b) {
        check_same_shape(a, b, "add");
        Tensor out = value(a);
        const Tensor& bv = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
        return binary_elementwise(a, b, std::move(out), [this](std::uint32_t ai, std::uint32_t bi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            accumulate(ai, [&](Tensor& da) { for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i]; });
            accumulate(bi, [&](Tensor& db) { for (std::size_t i = 0; i < g.numel(); ++i) db[i] += g[i]; });
        });
    }

    Value sub(Value a, Value b) {
        check_same_shape(a, b, "sub");
        Tensor out = value(a);
        const Tensor& bv = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
        return binary_elementwise(a, b, std::move(out), [this](std::uint32_t ai, std::uint32_t bi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            accumulate(ai, [&](Tensor& da) { for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i]; });
            accumulate(bi, [&](Tensor& db) { for (std::size_t i = 0; i < g.numel(); ++i) db[i] -= g[i]; });
        });
    }

    Value mul(Value a, Value b) {
        check_same_shape(a, b, "multiply");
        Tensor out = value(a);
        const Tensor& bv = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
        return binary_elementwise(a, b, std::move(out), [this](std::uint32_t ai, std::uint32_t bi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            const Tensor& av = nodes_[ai].value;
            const Tensor& bv2 = nodes_[bi].value;
            accumulate(ai, [&](Tensor& da) { for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * bv2[i]; });
            accumulate(bi, [&](Tensor& db) { for (std::size_t i = 0; i < g.numel(); ++i) db[i] += g[i] * av[i]; });
        });
    }

    Value div(Value a, Value b) {
        check_same_shape(a, b, "div");
        Tensor out = value(a);
        const Tensor& bv = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= bv[i];
        return binary_elementwise(a, b, std::move(out), [this](std::uint32_t ai, std::uint32_t bi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            const Tensor& ov = nodes_[oi].value;
            const Tensor& bv2 = nodes_[bi].value;
            accumulate(ai, [&](Tensor& da) { for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] / bv2[i]; });
            accumulate(bi, [&](Tensor& db) { for (std::size_t i = 0; i < g.numel(); ++i) db[i] -= g[i] * ov[i] / bv2[i]; });
        });
    }

    /// out = k*x + c, elementwise.
    Value affine(Value x, double k, double c) {
        Tensor out = value(x);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = k * out[i] + c;
        return unary(x, std::move(out), [this, k](std::uint32_t xi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            accumulate(xi, [&](Tensor& dx) { for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += k * g[i]; });
        });
    }

    Value scale(Value x, double k) { return affine(x, k, 0.0); }
    Value add_scalar(Value x, double c) { return affine(x, 1.0, c); }
    Value one_minus(Value x) { return affine(x, -1.0, 1.0); }

    Value log(Value x) {
        Tensor out = value(x);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::log(out[i]);
        check_finite(out, "log");
        return unary(x, std::move(out), [this](std::uint32_t xi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            const Tensor& xv = nodes_[xi].value;
            accumulate(xi, [&](Tensor& dx) { for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] / xv[i]; });
        });
    }

    Value sigmoid(Value x) {
        Tensor out = value(x);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = sigmoid_scalar(out[i]);
        return unary(x, std::move(out), [this](std::uint32_t xi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            const Tensor& s = nodes_[oi].value;
            accumulate(xi, [&](Tensor& dx) {
                for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] * s[i] * (1.0 - s[i]);
            });
        });
    }

    /// GELU, tanh approximation.
    Value gelu(Value x) {
        Tensor out = value(x);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = gelu_scalar(out[i]);
        return unary(x, std::move(out), [this](std::uint32_t xi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            const Tensor& xv = nodes_[xi].value;
            accumulate(xi, [&](Tensor& dx) {
                for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] * gelu_grad_scalar(xv[i]);
            });
        });
    }

    /// Clamp to [lo, hi]; pass-through gradient where the input was in range.
    Value clamp(Value x, double lo, double hi) {
        Tensor out = value(x);
        for (std::size_t i = 0; i < out.numel(); ++i) {
            if (out[i] < lo) out[i] = lo;
            else if (out[i] > hi) out[i] = hi;
        }
        return unary(x, std::move(out), [this, lo, hi](std::uint32_t xi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            const Tensor& xv = nodes_[xi].value;
            accumulate(xi, [&](Tensor& dx) {
                for (std::size_t i = 0; i < g.numel(); ++i)
                    if (xv[i] >= lo && xv[i] <= hi) dx[i] += g[i];
            });
        });
    }

    /// Inverted dropout; identity when train is off or rate is 0.
    Value dropout(Value x, double rate, bool train, Rng& rng) {
        if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
        if (!train || rate == 0.0) return x;
        const Tensor& xv = value(x);
        Tensor mask(xv.shape());
        const double keep = 1.0 - rate;
        for (std::size_t i = 0; i < mask.numel(); ++i)
            mask[i] = rng.bernoulli(rate) ? 0.0 : 1.0 / keep;
        Tensor out = xv;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
        return unary(x, std::move(out), [this, mask = std::move(mask)](std::uint32_t xi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            accumulate(xi, [&](Tensor& dx) { for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] * mask[i]; });
        });
    }

    // --- linear algebra ----------------------------------------------------

    Value matmul(Value a, Value b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
            throw std::invalid_argument("matmul: incompatible shapes " + av.shape_string() + " * " + bv.shape_string());
        Tensor out({av.rows(), bv.cols()});
        detail::matmul_acc(av.data(), bv.data(), out.data(), av.rows(), av.cols(), bv.cols());
        return binary_elementwise(a, b, std::move(out), [this](std::uint32_t ai, std::uint32_t bi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            const Tensor& av2 = nodes_[ai].value;
            const Tensor& bv2 = nodes_[bi].value;
            accumulate(ai, [&](Tensor& da) {
                detail::matmul_nt_acc(g.data(), bv2.data(), da.data(), g.rows(), g.cols(), av2.cols());
            });
            accumulate(bi, [&](Tensor& db) {
                detail::matmul_tn_acc(av2.data(), g.data(), db.data(), av2.rows(), av2.cols(), g.cols());
            });
        });
    }

    /// mat[L x C] + row[1 x C], broadcast over rows.
    Value add_row(Value mat, Value row) {
        const Tensor& mv = value(mat);
        const Tensor& rv = value(row);
        if (rv.rows() != 1 || rv.cols() != mv.cols())
            throw std::invalid_argument("add_row: row shape " + rv.shape_string() + " does not broadcast over " + mv.shape_string());
        Tensor out = mv;
        for (std::size_t r = 0; r < out.rows(); ++r)
            for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) += rv[c];
        return binary_elementwise(mat, row, std::move(out), [this](std::uint32_t mi, std::uint32_t ri, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            accumulate(mi, [&](Tensor& dm) { for (std::size_t i = 0; i < g.numel(); ++i) dm[i] += g[i]; });
            accumulate(ri, [&](Tensor& dr) {
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) dr[c] += g.at(r, c);
            });
        });
    }

    /// Gather rows of an embedding table; backward scatter-adds into the table.
    Value embedding_lookup(Value table, const std::vector<std::int32_t>& ids) {
        const Tensor& tv = value(table);
        if (tv.rank() != 2) throw std::invalid_argument("embedding_lookup: table must be 2-D");
        const std::size_t d = tv.cols();
        Tensor out({ids.size(), d});
        for (std::size_t i = 0; i < ids.size(); ++i) {
            auto id = ids[i];
            if (id < 0 || static_cast<std::size_t>(id) >= tv.rows())
                throw std::out_of_range("embedding_lookup: id " + std::to_string(id) + " out of range");
            for (std::size_t c = 0; c < d; ++c) out.at(i, c) = tv.at(static_cast<std::size_t>(id), c);
        }
        return unary(table, std::move(out), [this, ids](std::uint32_t ti, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            accumulate(ti, [&](Tensor& dt) {
                for (std::size_t i = 0; i < ids.size(); ++i)
                    for (std::size_t c = 0; c < g.cols(); ++c)
                        dt.at(static_cast<std::size_t>(ids[i]), c) += g.at(i, c);
            });
        });
    }

    Value concat_rows(const std::vector<Value>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
        const std::size_t c = value(parts[0]).cols();
        std::size_t rows = 0;
        for (const Value& p : parts) {
            if (value(p).cols() != c) throw std::invalid_argument("concat_rows: column mismatch");
            rows += value(p).rows();
        }
        Tensor out({rows, c});
        std::size_t r0 = 0;
        std::vector<std::uint32_t> pid;
        bool rg = false;
        for (const Value& p : parts) {
            const Tensor& pv = value(p);
            for (std::size_t i = 0; i < pv.numel(); ++i) out[r0 * c + i] = pv[i];
            r0 += pv.rows();
            pid.push_back(p.id);
            rg = rg || nodes_[p.id].requires_grad;
        }
        if (!rg) return push(std::move(out), false, nullptr);
        auto self = next_id();
        Value v = push(std::move(out), true, [this, pid, self]() {
            const Tensor& g = nodes_[self].grad;
            std::size_t row = 0;
            for (std::uint32_t id : pid) {
                const std::size_t pr = nodes_[id].value.rows();
                const std::size_t pc = nodes_[id].value.cols();
                accumulate(id, [&](Tensor& dp) {
                    for (std::size_t i = 0; i < pr * pc; ++i) dp[i] += g[row * pc + i];
                });
                row += pr;
            }
        });
        return v;
    }

    Value slice_row(Value m, std::size_t r) {
        const Tensor& mv = value(m);
        if (r >= mv.rows()) throw std::out_of_range("slice_row: row out of range");
        Tensor out({1, mv.cols()});
        for (std::size_t c = 0; c < mv.cols(); ++c) out[c] = mv.at(r, c);
        return unary(m, std::move(out), [this, r](std::uint32_t mi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            accumulate(mi, [&](Tensor& dm) {
                for (std::size_t c = 0; c < g.cols(); ++c) dm.at(r, c) += g[c];
            });
        });
    }

    // --- reductions and row ops --------------------------------------------

    Value sum_all(Value x) {
        const Tensor& xv = value(x);
        double s = 0.0;
        for (std::size_t i = 0; i < xv.numel(); ++i) s += xv[i];
        return unary(x, Tensor::scalar(s), [this](std::uint32_t xi, std::uint32_t oi) {
            const double g = nodes_[oi].grad[0];
            accumulate(xi, [&](Tensor& dx) { for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += g; });
        });
    }

    Value mean_all(Value x) {
        const Tensor& xv = value(x);
        const std::size_t n = xv.numel();
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += xv[i];
        return unary(x, Tensor::scalar(s / static_cast<double>(n)), [this, n](std::uint32_t xi, std::uint32_t oi) {
            const double g = nodes_[oi].grad[0] / static_cast<double>(n);
            accumulate(xi, [&](Tensor& dx) { for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += g; });
        });
    }

    /// Row-wise softmax, stabilized by row-max subtraction.
    Value softmax_rows(Value x) {
        const Tensor& xv = value(x);
        Tensor out = xv;
        softmax_rows_inplace(out);
        return unary(x, std::move(out), [this](std::uint32_t xi, std::uint32_t oi) {
            const Tensor& g = nodes_[oi].grad;
            const Tensor& s = nodes_[oi].value;
            accumulate(xi, [&](Tensor& dx) {
                for (std::size_t r = 0; r < s.rows(); ++r) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < s.cols(); ++c) dot += g.at(r, c) * s.at(r, c);
                    for (std::size_t c = 0; c < s.cols(); ++c)
                        dx.at(r, c) += s.at(r, c) * (g.at(r, c) - dot);
                }
            });
        });
    }

    /// Layer normalization over the last axis with learned scale/shift.
    Value layer_norm(Value x, Value gamma, Value beta, double eps = 1e-5) {
        const Tensor& xv = value(x);
        const Tensor& gv = value(gamma);
        const Tensor& bv = value(beta);
        const std::size_t R = xv.rows(), C = xv.cols();
        if (gv.cols() != C || bv.cols() != C || gv.rows() != 1 || bv.rows() != 1)
            throw std::invalid_argument("layer_norm: scale/shift must be 1 x cols");
        Tensor xhat({R, C});
        Tensor inv_std({R, 1});
        Tensor out({R, C});
        for (std::size_t r = 0; r < R; ++r) {
            double mean = 0.0;
            for (std::size_t c = 0; c < C; ++c) mean += xv.at(r, c);
            mean /= static_cast<double>(C);
            double var = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                const double d = xv.at(r, c) - mean;
                var += d * d;
            }
            var /= static_cast<double>(C);
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std.at(r, 0) = is;
            for (std::size_t c = 0; c < C; ++c) {
                const double xh = (xv.at(r, c) - mean) * is;
                xhat.at(r, c) = xh;
                out.at(r, c) = gv[c] * xh + bv[c];
            }
        }
        const bool rg = nodes_[x.id].requires_grad || nodes_[gamma.id].requires_grad || nodes_[beta.id].requires_grad;
        if (!rg) return push(std::move(out), false, nullptr);
        auto self = next_id();
        const std::uint32_t xi = x.id, gi = gamma.id, bi = beta.id;
        return push(std::move(out), true,
                    [this, xi, gi, bi, self, xhat = std::move(xhat), inv_std = std::move(inv_std), C]() {
            const Tensor& g = nodes_[self].grad;
            const Tensor& gv2 = nodes_[gi].value;
            const std::size_t R = g.rows();
            accumulate(gi, [&](Tensor& dg) {
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < C; ++c) dg[c] += g.at(r, c) * xhat.at(r, c);
            });
            accumulate(bi, [&](Tensor& db) {
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < C; ++c) db[c] += g.at(r, c);
            });
            accumulate(xi, [&](Tensor& dx) {
                for (std::size_t r = 0; r < R; ++r) {
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (std::size_t c = 0; c < C; ++c) {
                        const double dxh = g.at(r, c) * gv2[c];
                        sum_dxhat += dxh;
                        sum_dxhat_xhat += dxh * xhat.at(r, c);
                    }
                    const double is = inv_std.at(r, 0);
                    const double invC = 1.0 / static_cast<double>(C);
                    for (std::size_t c = 0; c < C; ++c) {
                        const double dxh = g.at(r, c) * gv2[c];
                        dx.at(r, c) += is * (dxh - invC * sum_dxhat - xhat.at(r, c) * invC * sum_dxhat_xhat);
                    }
                }
            });
        });
    }

    /// Fused multi-head self-attention over already-projected Q, K, V
    /// [L x d]. Positions >= valid_len are padding: they are never attended
    /// to, so their values cannot reach any real position.
    Value multi_head_attention(Value q, Value k, Value v, std::size_t n_heads, std::size_t valid_len) {
        const Tensor& qv = value(q);
        const Tensor& kv = value(k);
        const Tensor& vv = value(v);
        const std::size_t L = qv.rows(), d = qv.cols();
        if (!kv.same_shape(qv) || !vv.same_shape(qv))
            throw std::invalid_argument("multi_head_attention: Q/K/V shape mismatch");
        if (d % n_heads != 0) throw std::invalid_argument("multi_head_attention: d not divisible by heads");
        if (valid_len == 0 || valid_len > L) throw std::invalid_argument("multi_head_attention: bad valid_len");
        const std::size_t dh = d / n_heads;
        const double scl = 1.0 / std::sqrt(static_cast<double>(dh));

        // attention probabilities, one L x L block per head; masked columns stay 0
        Tensor probs({n_heads, L, L});
        Tensor out({L, d});
        for (std::size_t h = 0; h < n_heads; ++h) {
            const std::size_t off = h * dh;
            double* ph = probs.data() + h * L * L;
            for (std::size_t i = 0; i < L; ++i) {
                double* prow = ph + i * L;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < valid_len; ++j) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < dh; ++c) s += qv.at(i, off + c) * kv.at(j, off + c);
                    s *= scl;
                    prow[j] = s;
                    if (s > mx) mx = s;
                }
                double denom = 0.0;
                for (std::size_t j = 0; j < valid_len; ++j) {
                    prow[j] = std::exp(prow[j] - mx);
                    denom += prow[j];
                }
                for (std::size_t j = 0; j < valid_len; ++j) prow[j] /= denom;
                for (std::size_t c = 0; c < dh; ++c) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < valid_len; ++j) acc += prow[j] * vv.at(j, off + c);
                    out.at(i, off + c) = acc;
                }
            }
        }
        const bool rg = nodes_[q.id].requires_grad || nodes_[k.id].requires_grad || nodes_[v.id].requires_grad;
        if (!rg) return push(std::move(out), false, nullptr);
        auto self = next_id();
        const std::uint32_t qi = q.id, ki = k.id, vi = v.id;
        return push(std::move(out), true,
                    [this, qi, ki, vi, self, probs = std::move(probs), n_heads, valid_len, dh, scl]() {
            const Tensor& g = nodes_[self].grad;
            const Tensor& qv2 = nodes_[qi].value;
            const Tensor& kv2 = nodes_[ki].value;
            const Tensor& vv2 = nodes_[vi].value;
            const std::size_t L = g.rows();
            Tensor dq({L, qv2.cols()}), dk({L, qv2.cols()}), dv({L, qv2.cols()});
            for (std::size_t h = 0; h < n_heads; ++h) {
                const std::size_t off = h * dh;
                const double* ph = probs.data() + h * L * L;
                for (std::size_t i = 0; i < L; ++i) {
                    const double* prow = ph + i * L;
                    // dA_ij = sum_c g[i,off+c] * V[j,off+c]; dS via softmax jacobian
                    double dot = 0.0;
                    std::vector<double> dA(valid_len);
                    for (std::size_t j = 0; j < valid_len; ++j) {
                        double a = 0.0;
                        for (std::size_t c = 0; c < dh; ++c) a += g.at(i, off + c) * vv2.at(j, off + c);
                        dA[j] = a;
                        dot += a * prow[j];
                    }
                    for (std::size_t j = 0; j < valid_len; ++j) {
                        const double dS = prow[j] * (dA[j] - dot) * scl;
                        for (std::size_t c = 0; c < dh; ++c) {
                            dq.at(i, off + c) += dS * kv2.at(j, off + c);
                            dk.at(j, off + c) += dS * qv2.at(i, off + c);
                        }
                        for (std::size_t c = 0; c < dh; ++c)
                            dv.at(j, off + c) += prow[j] * g.at(i, off + c);
                    }
                }
            }
            accumulate(qi, [&](Tensor& t) { for (std::size_t i = 0; i < t.numel(); ++i) t[i] += dq[i]; });
            accumulate(ki, [&](Tensor& t) { for (std::size_t i = 0; i < t.numel(); ++i) t[i] += dk[i]; });
            accumulate(vi, [&](Tensor& t) { for (std::size_t i = 0; i < t.numel(); ++i) t[i] += dv[i]; });
        });
    }

    // --- backward ----------------------------------------------------------

    void backward(Value loss) {
        if (consumed_) throw std::logic_error("Tape::backward: tape already consumed");
        if (value(loss).numel() != 1) throw std::logic_error("Tape::backward: loss must be scalar");
        consumed_ = true;
        for (auto& n : nodes_)
            if (n.requires_grad) n.grad = Tensor::zeros(n.value.shape());
        if (!nodes_[loss.id].requires_grad)
            throw std::logic_error("Tape::backward: loss does not depend on any differentiable leaf");
        nodes_[loss.id].grad[0] = 1.0;
        for (std::uint32_t i = loss.id + 1; i-- > 0;) {
            if (nodes_[i].requires_grad && nodes_[i].backprop) nodes_[i].backprop();
        }
        backward_done_ = true;
    }

    static double sigmoid_scalar(double x) {
        if (x >= 0.0) {
            const double e = std::exp(-x);
            return 1.0 / (1.0 + e);
        }
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

    static double gelu_scalar(double x) {
        const double u = kSqrt2OverPi * (x + 0.044715 * x * x * x);
        return 0.5 * x * (1.0 + std::tanh(u));
    }

    static double gelu_grad_scalar(double x) {
        const double u = kSqrt2OverPi * (x + 0.044715 * x * x * x);
        const double t = std::tanh(u);
        const double sech2 = 1.0 - t * t;
        return 0.5 * (1.0 + t) + 0.5 * x * sech2 * kSqrt2OverPi * (1.0 + 3.0 * 0.044715 * x * x);
    }

    static void softmax_rows_inplace(Tensor& m) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double mx = m.at(r, 0);
            for (std::size_t c = 1; c < m.cols(); ++c) mx = std::max(mx, m.at(r, c));
            double denom = 0.0;
            for (std::size_t c = 0; c < m.cols(); ++c) {
                m.at(r, c) = std::exp(m.at(r, c) - mx);
                denom += m.at(r, c);
            }
            for (std::size_t c = 0; c < m.cols(); ++c) m.at(r, c) /= denom;
        }
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void()> backprop;
    };

    static constexpr double kSqrt2OverPi = 0.7978845608028654;

    std::uint32_t next_id() const { return static_cast<std::uint32_t>(nodes_.size()); }

    Value push(Tensor v, bool requires_grad, std::function<void()> backprop) {
        if (consumed_) throw std::logic_error("Tape: cannot record after backward");
        Node n;
        n.value = std::move(v);
        n.requires_grad = requires_grad;
        n.backprop = std::move(backprop);
        nodes_.push_back(std::move(n));
        return Value{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    template <typename F>
    Value unary(Value x, Tensor out, F&& bp) {
        if (!nodes_[x.id].requires_grad) return push(std::move(out), false, nullptr);
        auto self = next_id();
        const std::uint32_t xi = x.id;
        return push(std::move(out), true, [bp = std::forward<F>(bp), xi, self]() { bp(xi, self); });
    }

    template <typename F>
    Value binary_elementwise(Value a, Value b, Tensor out, F&& bp) {
        if (!nodes_[a.id].requires_grad && !nodes_[b.id].requires_grad)
            return push(std::move(out), false, nullptr);
        auto self = next_id();
        const std::uint32_t ai = a.id, bi = b.id;
        return push(std::move(out), true, [bp = std::forward<F>(bp), ai, bi, self]() { bp(ai, bi, self); });
    }

    template <typename F>
    void accumulate(std::uint32_t id, F&& f) {
        if (nodes_[id].requires_grad) f(nodes_[id].grad);
    }

    void check_same_shape(Value a, Value b, const char* op) const {
        if (!value(a).same_shape(value(b)))
            throw std::invalid_argument(std::string(op) + ": shape mismatch " + value(a).shape_string() +
                                        " vs " + value(b).shape_string());
    }

    static void check_finite(const Tensor& t, const char* op) {
        if (!t.all_finite()) throw std::runtime_error(std::string(op) + ": non-finite output");
    }

    std::vector<Node> nodes_;
    bool consumed_ = false;
    bool backward_done_ = false;
};

inline const Tensor& Value::val() const { return tape->value(*this); }

} // namespace irp
