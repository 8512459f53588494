// Finite-difference checks for every autodiff op, small shapes. These are
// the base oracles the network-level gradient test builds on.

#include <cmath>
#include <functional>

#include "autodiff.hpp"
#include "common.hpp"
#include "doctest.h"

using namespace gebc;
using ad::Graph;
using ad::Var;

namespace {

Tensor random_tensor(Rng& rng, int r, int c, double scale = 1.0) {
    Tensor t(r, c);
    for (double& v : t.data) v = rng.uniform(-scale, scale);
    return t;
}

// Central finite differences of a scalar-valued graph builder with respect
// to every entry of every parameter.
void check_gradients(std::vector<ad::Parameter*> params,
                     const std::function<Var(Graph&)>& build, double tol = 1e-6,
                     double h = 1e-6) {
    for (ad::Parameter* p : params) p->zero_grad();
    Graph g;
    Var loss = build(g);
    REQUIRE(loss->rows() == 1);
    REQUIRE(loss->cols() == 1);
    g.backward(loss);

    for (ad::Parameter* p : params) {
        for (size_t i = 0; i < p->value.data.size(); ++i) {
            double saved = p->value.data[i];
            p->value.data[i] = saved + h;
            Graph gp(false);
            double up = build(gp)->v().data[0];
            p->value.data[i] = saved - h;
            Graph gm(false);
            double down = build(gm)->v().data[0];
            p->value.data[i] = saved;
            double fd = (up - down) / (2 * h);
            double analytic = p->grad.data[i];
            double denom = std::max({std::fabs(fd), std::fabs(analytic), 1e-4});
            CAPTURE(p->name);
            CAPTURE(i);
            CHECK(std::fabs(fd - analytic) / denom < tol);
        }
    }
}

}  // namespace

TEST_CASE("matmul and bias gradients") {
    Rng rng(1);
    ad::Parameter a("a", 3, 4), b("b", 4, 2), bias("bias", 1, 2);
    a.value = random_tensor(rng, 3, 4);
    b.value = random_tensor(rng, 4, 2);
    bias.value = random_tensor(rng, 1, 2);
    check_gradients({&a, &b, &bias}, [&](Graph& g) {
        Var out = ad::add_row(g, ad::matmul(g, g.param(a), g.param(b)), g.param(bias));
        return ad::sum_all(g, ad::mul(g, out, out));
    });
}

TEST_CASE("matmul_nt gradients") {
    Rng rng(2);
    ad::Parameter a("a", 3, 5), b("b", 4, 5);
    a.value = random_tensor(rng, 3, 5);
    b.value = random_tensor(rng, 4, 5);
    check_gradients({&a, &b}, [&](Graph& g) {
        Var out = ad::matmul_nt(g, g.param(a), g.param(b));
        return ad::sum_all(g, ad::mul(g, out, out));
    });
}

TEST_CASE("elementwise op gradients") {
    Rng rng(3);
    ad::Parameter a("a", 2, 6), b("b", 2, 6);
    a.value = random_tensor(rng, 2, 6);
    b.value = random_tensor(rng, 2, 6);
    check_gradients({&a, &b}, [&](Graph& g) {
        Var x = ad::mul(g, ad::sigmoid(g, g.param(a)), ad::tanh_act(g, g.param(b)));
        Var y = ad::add(g, x, ad::scale(g, g.param(a), 0.5));
        return ad::sum_all(g, ad::mul(g, y, y));
    });
}

TEST_CASE("relu gradient away from the kink") {
    ad::Parameter a("a", 1, 4);
    a.value = Tensor::from_rows({{-1.5, -0.3, 0.4, 2.0}});
    check_gradients({&a}, [&](Graph& g) {
        Var y = ad::relu(g, g.param(a));
        return ad::sum_all(g, ad::mul(g, y, y));
    });
}

TEST_CASE("clamp gradient passes only inside the range") {
    ad::Parameter a("a", 1, 3);
    a.value = Tensor::from_rows({{-2.0, 0.25, 3.0}});
    Graph g;
    Var y = ad::clamp(g, g.param(a), 0.0, 1.0);
    Var loss = ad::sum_all(g, y);
    g.backward(loss);
    CHECK(a.grad.at(0, 0) == 0.0);
    CHECK(a.grad.at(0, 1) == 1.0);
    CHECK(a.grad.at(0, 2) == 0.0);
}

TEST_CASE("layer_norm gradients") {
    Rng rng(4);
    ad::Parameter x("x", 3, 5), gain("gain", 1, 5), bias("bias", 1, 5);
    x.value = random_tensor(rng, 3, 5);
    gain.value = random_tensor(rng, 1, 5, 0.8);
    bias.value = random_tensor(rng, 1, 5, 0.3);
    check_gradients({&x, &gain, &bias}, [&](Graph& g) {
        Var y = ad::layer_norm(g, g.param(x), g.param(gain), g.param(bias), 1e-5);
        return ad::sum_all(g, ad::mul(g, y, y));
    });
}

TEST_CASE("layer_norm_plain normalizes rows") {
    Rng rng(5);
    ad::Parameter x("x", 4, 8);
    x.value = random_tensor(rng, 4, 8, 2.0);
    Graph g;
    Var y = ad::layer_norm_plain(g, g.param(x), 1e-9);
    for (int r = 0; r < 4; ++r) {
        double mean = 0.0, var = 0.0;
        for (int c = 0; c < 8; ++c) mean += y->v().at(r, c);
        mean /= 8;
        for (int c = 0; c < 8; ++c) var += (y->v().at(r, c) - mean) * (y->v().at(r, c) - mean);
        var /= 8;
        CHECK(std::fabs(mean) < 1e-12);
        CHECK(std::fabs(var - 1.0) < 1e-6);
    }
    check_gradients({&x}, [&](Graph& g2) {
        Var out = ad::layer_norm_plain(g2, g2.param(x), 1e-9);
        Tensor w(4, 8);
        for (size_t i = 0; i < w.data.size(); ++i) w.data[i] = 0.1 * (static_cast<double>(i) + 1);
        return ad::sum_all(g2, ad::mul(g2, out, g2.input(std::move(w))));
    });
}

TEST_CASE("softmax_groups rows sum to one and gradients check") {
    Rng rng(6);
    ad::Parameter x("x", 3, 8);
    x.value = random_tensor(rng, 3, 8, 2.0);
    Graph g;
    Var y = ad::softmax_groups(g, g.param(x), 4);
    for (int r = 0; r < 3; ++r)
        for (int q = 0; q < 2; ++q) {
            double sum = 0.0;
            for (int k = 0; k < 4; ++k) sum += y->v().at(r, q * 4 + k);
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    check_gradients({&x}, [&](Graph& g2) {
        Var out = ad::softmax_groups(g2, g2.param(x), 4);
        Tensor w(3, 8);
        for (size_t i = 0; i < w.data.size(); ++i) w.data[i] = std::sin(static_cast<double>(i));
        return ad::sum_all(g2, ad::mul(g2, out, g2.input(std::move(w))));
    });
}

TEST_CASE("masked_softmax_rows handles full and empty masks") {
    Rng rng(7);
    ad::Parameter x("x", 2, 5);
    x.value = random_tensor(rng, 2, 5, 1.5);
    std::vector<uint8_t> mask = {1, 0, 1, 1, 0,   // row 0: partial
                                 0, 0, 0, 0, 0};  // row 1: fully masked
    Graph g;
    Var y = ad::masked_softmax_rows(g, g.param(x), mask);
    double sum0 = 0.0;
    for (int c = 0; c < 5; ++c) sum0 += y->v().at(0, c);
    CHECK(sum0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y->v().at(0, 1) == 0.0);
    for (int c = 0; c < 5; ++c) CHECK(y->v().at(1, c) == 0.0);

    check_gradients({&x}, [&](Graph& g2) {
        Var out = ad::masked_softmax_rows(g2, g2.param(x), mask);
        Tensor w(2, 5);
        for (size_t i = 0; i < w.data.size(); ++i) w.data[i] = 0.3 * (static_cast<double>(i) - 4);
        return ad::sum_all(g2, ad::mul(g2, out, g2.input(std::move(w))));
    });
}

TEST_CASE("concat/slice/select/blend gradients") {
    Rng rng(8);
    ad::Parameter a("a", 3, 2), b("b", 3, 3), table("table", 5, 4);
    a.value = random_tensor(rng, 3, 2);
    b.value = random_tensor(rng, 3, 3);
    table.value = random_tensor(rng, 5, 4);
    std::vector<int> ids = {4, 0, 4};
    std::vector<uint8_t> use_true = {1, 0, 1};
    check_gradients({&a, &b, &table}, [&](Graph& g) {
        Var cat = ad::concat_cols(g, {g.param(a), g.param(b)});
        Var sl = ad::slice_cols(g, cat, 1, 4);
        Var rows = ad::select_rows(g, g.param(table), ids);
        Var mixed = ad::blend_rows(g, sl, ad::slice_cols(g, rows, 0, 3), use_true);
        return ad::sum_all(g, ad::mul(g, mixed, mixed));
    });
}

TEST_CASE("deform_sample and point_mix gradients") {
    Rng rng(9);
    const int L = 6, heads = 2, points = 3, hd = 2;
    ad::Parameter values("values", L, heads * hd), pos("pos", 2, heads * points),
        wlog("wlog", 2, heads * points);
    values.value = random_tensor(rng, L, heads * hd);
    // strictly interior fractional positions, away from integers
    pos.value = Tensor::from_rows({{0.4, 1.7, 2.3, 3.6, 4.2, 1.1},
                                   {2.6, 0.3, 3.3, 1.8, 4.7, 2.2}});
    wlog.value = random_tensor(rng, 2, heads * points);
    check_gradients({&values, &pos, &wlog}, [&](Graph& g) {
        Var sampled = ad::deform_sample(g, g.param(values), g.param(pos), heads, points);
        Var weights = ad::softmax_groups(g, g.param(wlog), points);
        Var mixed = ad::point_mix(g, sampled, weights, heads, points);
        return ad::sum_all(g, ad::mul(g, mixed, mixed));
    });
}

TEST_CASE("deform_sample interpolates linearly at fractional positions") {
    Tensor values = Tensor::from_rows({{0.0, 10.0}, {1.0, 20.0}, {2.0, 30.0}, {3.0, 40.0}});
    Graph g;
    Var v = g.input(values);
    Var p = g.input(Tensor::from_rows({{2.5}}));
    Var out = ad::deform_sample(g, v, p, 1, 1);
    CHECK(out->v().at(0, 0) == doctest::Approx(2.5));
    CHECK(out->v().at(0, 1) == doctest::Approx(35.0));
}

TEST_CASE("cross_entropy_sum matches the closed-form gradient") {
    Rng rng(10);
    ad::Parameter logits("logits", 3, 5);
    logits.value = random_tensor(rng, 3, 5, 2.0);
    std::vector<int> targets = {2, 0, 4};
    std::vector<uint8_t> mask = {1, 0, 1};

    Graph g;
    Var loss = ad::cross_entropy_sum(g, g.param(logits), targets, mask);
    g.backward(loss);

    // gradient of -log softmax at a row is softmax - onehot
    for (int r = 0; r < 3; ++r) {
        const double* lr = logits.value.row(r);
        double mx = *std::max_element(lr, lr + 5);
        double sum = 0.0;
        for (int c = 0; c < 5; ++c) sum += std::exp(lr[c] - mx);
        for (int c = 0; c < 5; ++c) {
            double expected = mask[r] ? std::exp(lr[c] - mx) / sum - (c == targets[r] ? 1.0 : 0.0)
                                      : 0.0;
            CHECK(logits.grad.at(r, c) == doctest::Approx(expected).epsilon(1e-10));
        }
    }

    check_gradients({&logits}, [&](Graph& g2) {
        return ad::cross_entropy_sum(g2, g2.param(logits), targets, mask, {0.7, 1.0, 1.3});
    });
}

TEST_CASE("masked rows contribute exactly zero to cross entropy") {
    ad::Parameter logits("logits", 2, 4);
    logits.value = Tensor::from_rows({{5.0, -1.0, 0.0, 2.0}, {100.0, 0.0, 0.0, 0.0}});
    std::vector<int> targets = {0, 1};
    Graph g;
    Var with_pad = ad::cross_entropy_sum(g, g.param(logits), targets, {1, 0});
    ad::Parameter first("first", 1, 4);
    first.value = Tensor::from_rows({{5.0, -1.0, 0.0, 2.0}});
    Graph g3;
    Var only = ad::cross_entropy_sum(g3, g3.param(first), {0}, {1});
    CHECK(with_pad->v().data[0] == doctest::Approx(only->v().data[0]).epsilon(1e-14));
}
