#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "irp/optimizer.hpp"
#include "irp/rng.hpp"
#include "irp/tape.hpp"
#include "irp/tensor.hpp"

using namespace irp;

namespace {

Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Central-difference check of d(build(inputs))/d(inputs) for a scalar-valued
// builder. The builder re-runs from the raw tensors, so finite differences
// see exactly the recorded computation.
void check_gradients(std::vector<Tensor*> inputs,
                     const std::function<Value(Tape&, const std::vector<Value>&)>& build,
                     double tol = 1e-6) {
    auto eval = [&]() {
        Tape t;
        std::vector<Value> vs;
        for (Tensor* in : inputs) vs.push_back(t.leaf(*in, false));
        return build(t, vs).item();
    };
    Tape t;
    std::vector<Value> vs;
    for (Tensor* in : inputs) vs.push_back(t.leaf(*in, true));
    Value loss = build(t, vs);
    t.backward(loss);
    std::vector<double*> coords;
    std::vector<double> analytic;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor& g = t.grad(vs[k]);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            coords.push_back(&(*inputs[k])[i]);
            analytic.push_back(g[i]);
        }
    }
    const auto rep = grad_check(eval, coords, analytic, 1e-5);
    INFO("worst coord " << rep.worst_coord << ": analytic " << rep.worst_analytic
                        << " vs numeric " << rep.worst_numeric);
    REQUIRE(rep.max_rel_err < tol);
}

// Weighted sum-to-scalar so asymmetric gradient errors cannot cancel.
Value weighted_sum(Tape& t, Value x, const Tensor& weights) {
    return t.sum_all(t.mul(x, t.constant(weights)));
}

} // namespace

TEST_CASE("tensor basics", "[tensor]") {
    Tensor t({2, 3});
    REQUIRE(t.numel() == 6);
    REQUIRE(t.rows() == 2);
    REQUIRE(t.cols() == 3);
    t.at(1, 2) = 5.0;
    REQUIRE(t[5] == 5.0);
    REQUIRE_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
    REQUIRE(Tensor::scalar(3.5).item() == 3.5);
    REQUIRE_FALSE(Tensor({1, 2}, {1.0, std::nan("")}).all_finite());
}

TEST_CASE("matmul identity and shape errors", "[tensor][autodiff]") {
    Rng rng(11);
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
    Tape t;
    Value out = t.matmul(t.constant(a), t.constant(eye));
    REQUIRE(out.val() == a);
    Tensor bad({3, 3});
    REQUIRE_THROWS_AS(t.matmul(t.constant(a), t.constant(bad)), std::invalid_argument);
}

TEST_CASE("sigmoid fixed points", "[autodiff]") {
    Tape t;
    Value s = t.sigmoid(t.constant(Tensor::scalar(0.0)));
    REQUIRE(s.item() == 0.5);
    // saturation is handled through the stable branch on both sides
    Value big = t.sigmoid(t.constant(Tensor::scalar(800.0)));
    REQUIRE(big.item() == 1.0);
    Value small = t.sigmoid(t.constant(Tensor::scalar(-30.0)));
    REQUIRE(small.item() > 0.0);
    REQUIRE(small.item() < 1e-12);
}

TEST_CASE("softmax rows: stabilized, nonnegative, sums to one", "[autodiff]") {
    Tape t;
    Value s = t.softmax_rows(t.constant(Tensor({1, 2}, {1000.0, 1000.0})));
    REQUIRE(s.val()[0] == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(s.val()[1] == Catch::Approx(0.5).margin(1e-15));

    Rng rng(3);
    Tensor x = rand_tensor({5, 7}, rng, -30.0, 30.0);
    Value sm = t.softmax_rows(t.constant(x));
    for (std::size_t r = 0; r < 5; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 7; ++c) {
            REQUIRE(sm.val().at(r, c) >= 0.0);
            sum += sm.val().at(r, c);
        }
        REQUIRE(std::fabs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("layer norm output is standardized before scale/shift", "[autodiff]") {
    Rng rng(5);
    Tensor x = rand_tensor({4, 16}, rng, -3.0, 3.0);
    Tape t;
    Value out = t.layer_norm(t.constant(x), t.constant(Tensor::full({1, 16}, 1.0)),
                             t.constant(Tensor({1, 16})));
    for (std::size_t r = 0; r < 4; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t c = 0; c < 16; ++c) mean += out.val().at(r, c);
        mean /= 16.0;
        for (std::size_t c = 0; c < 16; ++c) {
            const double d = out.val().at(r, c) - mean;
            var += d * d;
        }
        var /= 16.0;
        REQUIRE(std::fabs(mean) < 1e-10);
        REQUIRE(std::fabs(var - 1.0) < 1e-4); // eps = 1e-5 shifts variance slightly below 1
    }
}

TEST_CASE("dropout: identity when off, inverted scaling when on", "[autodiff]") {
    Rng rng(7);
    Tensor x = rand_tensor({8, 8}, rng);
    Tape t;
    Rng drop_rng(42);
    Value off = t.dropout(t.constant(x), 0.3, false, drop_rng);
    REQUIRE(off.val() == x);

    Rng r1(42), r2(42);
    Tape t1, t2;
    Value a = t1.dropout(t1.constant(x), 0.3, true, r1);
    Value b = t2.dropout(t2.constant(x), 0.3, true, r2);
    REQUIRE(a.val() == b.val()); // same seed, same mask
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double v = a.val()[i];
        REQUIRE((v == 0.0 || v == Catch::Approx(x[i] / 0.7)));
    }
    REQUIRE_THROWS_AS(t.dropout(t.constant(x), 1.0, true, drop_rng), std::invalid_argument);
}

TEST_CASE("gradients of every primitive match finite differences", "[autodiff][oracle]") {
    Rng rng(101);

    SECTION("add / sub / mul / div / affine") {
        Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({3, 4}, rng, 0.5, 2.0);
        Tensor w = rand_tensor({3, 4}, rng);
        check_gradients({&a, &b}, [&](Tape& t, const std::vector<Value>& v) {
            Value x = t.add(v[0], v[1]);
            x = t.sub(x, t.mul(v[0], v[1]));
            x = t.div(x, v[1]);
            x = t.affine(x, 1.7, -0.3);
            return weighted_sum(t, x, w);
        });
    }
    SECTION("matmul") {
        Tensor a = rand_tensor({3, 5}, rng), b = rand_tensor({5, 2}, rng);
        Tensor w = rand_tensor({3, 2}, rng);
        check_gradients({&a, &b}, [&](Tape& t, const std::vector<Value>& v) {
            return weighted_sum(t, t.matmul(v[0], v[1]), w);
        });
    }
    SECTION("add_row") {
        Tensor m = rand_tensor({4, 3}, rng), r = rand_tensor({1, 3}, rng);
        Tensor w = rand_tensor({4, 3}, rng);
        check_gradients({&m, &r}, [&](Tape& t, const std::vector<Value>& v) {
            return weighted_sum(t, t.add_row(v[0], v[1]), w);
        });
    }
    SECTION("embedding_lookup with repeated ids accumulates") {
        Tensor table = rand_tensor({6, 4}, rng);
        Tensor w = rand_tensor({5, 4}, rng);
        const std::vector<std::int32_t> ids = {1, 4, 1, 0, 5};
        check_gradients({&table}, [&](Tape& t, const std::vector<Value>& v) {
            return weighted_sum(t, t.embedding_lookup(v[0], ids), w);
        });
    }
    SECTION("softmax_rows") {
        Tensor x = rand_tensor({3, 6}, rng, -2.0, 2.0);
        Tensor w = rand_tensor({3, 6}, rng);
        check_gradients({&x}, [&](Tape& t, const std::vector<Value>& v) {
            return weighted_sum(t, t.softmax_rows(v[0]), w);
        });
    }
    SECTION("layer_norm") {
        Tensor x = rand_tensor({3, 8}, rng, -2.0, 2.0);
        Tensor g = rand_tensor({1, 8}, rng, 0.5, 1.5), b = rand_tensor({1, 8}, rng);
        Tensor w = rand_tensor({3, 8}, rng);
        check_gradients({&x, &g, &b}, [&](Tape& t, const std::vector<Value>& v) {
            return weighted_sum(t, t.layer_norm(v[0], v[1], v[2]), w);
        }, 2e-6);
    }
    SECTION("gelu / sigmoid / log / clamp") {
        Tensor x = rand_tensor({4, 4}, rng, 0.1, 2.0);
        Tensor w = rand_tensor({4, 4}, rng);
        check_gradients({&x}, [&](Tape& t, const std::vector<Value>& v) {
            Value y = t.gelu(v[0]);
            y = t.sigmoid(y);
            y = t.clamp(y, 1e-7, 1.0 - 1e-7);
            y = t.log(y);
            return weighted_sum(t, y, w);
        });
    }
    SECTION("mean / sum / concat_rows / slice_row") {
        Tensor a = rand_tensor({2, 3}, rng), b = rand_tensor({4, 3}, rng);
        check_gradients({&a, &b}, [&](Tape& t, const std::vector<Value>& v) {
            Value cat = t.concat_rows({v[0], v[1]});
            Value row = t.slice_row(cat, 4);
            return t.add(t.mean_all(cat), t.sum_all(row));
        });
    }
    SECTION("multi_head_attention, full and masked") {
        for (std::size_t valid : {std::size_t{6}, std::size_t{4}}) {
            Tensor q = rand_tensor({6, 8}, rng), k = rand_tensor({6, 8}, rng), v2 = rand_tensor({6, 8}, rng);
            Tensor w = rand_tensor({6, 8}, rng);
            check_gradients({&q, &k, &v2}, [&](Tape& t, const std::vector<Value>& v) {
                return weighted_sum(t, t.multi_head_attention(v[0], v[1], v[2], 2, valid), w);
            }, 2e-6);
        }
    }
    SECTION("dropout with a fixed mask") {
        Tensor x = rand_tensor({5, 5}, rng);
        Tensor w = rand_tensor({5, 5}, rng);
        check_gradients({&x}, [&](Tape& t, const std::vector<Value>& v) {
            Rng drop_rng(99); // same mask on every rebuild
            return weighted_sum(t, t.dropout(v[0], 0.4, true, drop_rng), w);
        });
    }
}

TEST_CASE("random two-layer composition matches finite differences", "[autodiff][oracle]") {
    Rng rng(2024);
    Tensor x = rand_tensor({4, 6}, rng);
    Tensor w1 = rand_tensor({6, 8}, rng), b1 = rand_tensor({1, 8}, rng);
    Tensor w2 = rand_tensor({8, 3}, rng), b2 = rand_tensor({1, 3}, rng);
    Tensor g = rand_tensor({1, 3}, rng, 0.5, 1.5), be = rand_tensor({1, 3}, rng);
    Tensor w = rand_tensor({4, 3}, rng);
    check_gradients({&x, &w1, &b1, &w2, &b2, &g, &be}, [&](Tape& t, const std::vector<Value>& v) {
        Value h = t.gelu(t.add_row(t.matmul(v[0], v[1]), v[2]));
        h = t.add_row(t.matmul(h, v[3]), v[4]);
        h = t.layer_norm(h, v[5], v[6]);
        return weighted_sum(t, t.sigmoid(h), w);
    });
}

TEST_CASE("backward: linear case, fan-out accumulation, error paths", "[autodiff]") {
    SECTION("loss = sum(W) gives all-ones gradient") {
        Tape t;
        Value w = t.leaf(Tensor::full({3, 2}, 2.5), true);
        t.backward(t.sum_all(w));
        for (std::size_t i = 0; i < 6; ++i) REQUIRE(t.grad(w)[i] == 1.0);
    }
    SECTION("sigmoid gradient at 0 is 0.25") {
        Tape t;
        Value x = t.leaf(Tensor::scalar(0.0), true);
        t.backward(t.sigmoid(x));
        REQUIRE(t.grad(x)[0] == Catch::Approx(0.25).epsilon(1e-15));
    }
    SECTION("fan-out sums: d(x*x)/dx via two uses") {
        Tape t;
        Value x = t.leaf(Tensor::scalar(3.0), true);
        t.backward(t.mul(x, x));
        REQUIRE(t.grad(x)[0] == 6.0);
    }
    SECTION("non-scalar loss refused") {
        Tape t;
        Value x = t.leaf(Tensor::full({2, 2}, 1.0), true);
        REQUIRE_THROWS_AS(t.backward(x), std::logic_error);
    }
    SECTION("tape reuse refused") {
        Tape t;
        Value x = t.leaf(Tensor::scalar(1.0), true);
        Value l = t.sigmoid(x);
        t.backward(l);
        REQUIRE_THROWS_AS(t.backward(l), std::logic_error);
    }
    SECTION("constants receive no gradient pass") {
        Tape t;
        Value c = t.constant(Tensor::scalar(2.0));
        Value x = t.leaf(Tensor::scalar(3.0), true);
        t.backward(t.mul(c, x));
        REQUIRE(t.grad(x)[0] == 2.0);
        REQUIRE_THROWS_AS(t.grad(c).numel(), std::logic_error);
    }
}

TEST_CASE("identical seeded forward+backward passes are bit-identical", "[autodiff]") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tensor x = rand_tensor({4, 8}, rng);
        Tensor w = rand_tensor({8, 8}, rng);
        Tape t;
        Value xv = t.leaf(x, true);
        Value wv = t.leaf(w, true);
        Rng drop(seed + 1);
        Value h = t.dropout(t.gelu(t.matmul(xv, wv)), 0.2, true, drop);
        t.backward(t.mean_all(h));
        return std::pair(t.grad(xv), t.grad(wv));
    };
    auto [gx1, gw1] = run(77);
    auto [gx2, gw2] = run(77);
    REQUIRE(gx1 == gx2);
    REQUIRE(gw1 == gw2);
}

TEST_CASE("adamw: hand-evaluated first step and fixed points", "[optimizer]") {
    SECTION("zero gradient, zero decay: parameters unchanged") {
        Tensor p = Tensor::scalar(1.5);
        AdamW opt({.learning_rate = 0.1, .weight_decay = 0.0});
        std::vector<Tensor*> ps = {&p};
        std::vector<Tensor> gs = {Tensor::scalar(0.0)};
        opt.step(ps, gs);
        REQUIRE(p.item() == 1.5);
    }
    SECTION("first step with g=1, lr=0.1, no decay lands at ~0.9") {
        // m-hat = v-hat = 1 after bias correction, so the step is
        // -0.1 * 1/(1 + eps)
        Tensor p = Tensor::scalar(1.0);
        AdamW opt({.learning_rate = 0.1, .weight_decay = 0.0});
        std::vector<Tensor*> ps = {&p};
        std::vector<Tensor> gs = {Tensor::scalar(1.0)};
        opt.step(ps, gs);
        REQUIRE(p.item() == Catch::Approx(0.9).margin(1e-8));
        REQUIRE(p.item() > 0.9); // eps shrinks the step slightly
    }
    SECTION("zero learning rate: parameters unchanged regardless of gradients") {
        Tensor p = Tensor::scalar(2.0);
        AdamW opt({.learning_rate = 0.0, .weight_decay = 1e-2});
        std::vector<Tensor*> ps = {&p};
        std::vector<Tensor> gs = {Tensor::scalar(123.0)};
        opt.step(ps, gs);
        opt.step(ps, gs);
        REQUIRE(p.item() == 2.0);
    }
    SECTION("decoupled decay pulls weights toward zero even with g=0") {
        Tensor p = Tensor::scalar(1.0);
        AdamW opt({.learning_rate = 0.1, .weight_decay = 0.5});
        std::vector<Tensor*> ps = {&p};
        std::vector<Tensor> gs = {Tensor::scalar(0.0)};
        opt.step(ps, gs);
        REQUIRE(p.item() == Catch::Approx(1.0 - 0.1 * 0.5 * 1.0).margin(1e-12));
    }
    SECTION("non-finite gradient rejected") {
        Tensor p = Tensor::scalar(1.0);
        AdamW opt;
        std::vector<Tensor*> ps = {&p};
        std::vector<Tensor> gs = {Tensor::scalar(std::nan(""))};
        REQUIRE_THROWS_AS(opt.step(ps, gs), std::runtime_error);
    }
}

TEST_CASE("grad_check: exact for linear, detects corrupted rules", "[optimizer][oracle]") {
    Tensor x({1, 3}, {0.3, -0.7, 1.1});
    const std::vector<double> coeff = {2.0, -1.0, 0.5};
    auto f = [&]() { return coeff[0] * x[0] + coeff[1] * x[1] + coeff[2] * x[2]; };
    std::vector<double*> coords = {&x[0], &x[1], &x[2]};

    auto rep = grad_check(f, coords, coeff, 1e-5);
    REQUIRE(rep.max_rel_err < 1e-9);

    // negative control: a corrupted analytic gradient must be flagged
    std::vector<double> corrupted = coeff;
    corrupted[1] *= 1.5;
    rep = grad_check(f, coords, corrupted, 1e-5);
    REQUIRE(rep.max_rel_err > 1e-2);
    REQUIRE(rep.worst_coord == 1);
}
