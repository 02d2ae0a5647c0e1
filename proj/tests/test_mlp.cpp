#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "neolink/mlp.hpp"

using namespace neolink;

namespace {

// Central finite difference of a scalar function of one parameter.
template <typename F>
double central_diff(double& param, F&& f, double step = 1e-6) {
    const double saved = param;
    param = saved + step;
    const double hi = f();
    param = saved - step;
    const double lo = f();
    param = saved;
    return (hi - lo) / (2.0 * step);
}

double rel_err(double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
    return std::abs(got - want) / denom;
}

}  // namespace

TEST_CASE("mlp forward matches a hand computation") {
    Mlp m(2, 2, 1);
    // h = relu(W1 x + b1), y = W2 h + b2
    m.w1 = {1.0, 0.0, 0.0, -1.0};  // rows: [1 0], [0 -1]
    m.b1 = {0.0, 0.5};
    m.w2 = {2.0, 3.0};
    m.b2 = {-1.0};
    const std::vector<double> x{0.25, -0.5};
    std::vector<double> y(1);
    m.forward(x, y);
    // pre_hidden = [0.25, 1.0] -> relu same; y = 2*0.25 + 3*1.0 - 1 = 2.5
    CHECK(y[0] == doctest::Approx(2.5).epsilon(1e-15));

    // negative pre-activation is clipped
    const std::vector<double> x2{-0.25, 1.0};
    m.forward(x2, y);
    // pre_hidden = [-0.25, -0.5] -> relu [0, 0]; y = -1
    CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("softplus output activation") {
    Mlp m(1, 1, 1, OutputActivation::softplus);
    m.w1 = {1.0};
    m.b1 = {0.0};
    m.w2 = {1.0};
    m.b2 = {0.0};
    std::vector<double> y(1);
    m.forward(std::vector<double>{2.0}, y);
    CHECK(y[0] == doctest::Approx(std::log1p(std::exp(2.0))).epsilon(1e-12));
    // large inputs must not overflow
    m.forward(std::vector<double>{800.0}, y);
    CHECK(std::isfinite(y[0]));
    CHECK(y[0] == doctest::Approx(800.0).epsilon(1e-12));
    // large negative pre-activation underflows gracefully to ~0
    m.w2 = {-1.0};
    m.forward(std::vector<double>{800.0}, y);
    CHECK(y[0] >= 0.0);
    CHECK(y[0] <= 1e-300);
}

TEST_CASE("mlp rejects zero-width construction") {
    CHECK_THROWS_AS(Mlp(0, 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(Mlp(1, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(Mlp(1, 3, 0), std::invalid_argument);
}

TEST_CASE("mlp init stays within the fan-in bound") {
    std::mt19937_64 rng(5);
    Mlp m(3, 8, 2);
    m.init(rng);
    const double s1 = 1.0 / std::sqrt(3.0);
    const double s2 = 1.0 / std::sqrt(8.0);
    for (double w : m.w1) CHECK(std::abs(w) <= s1);
    for (double b : m.b1) CHECK(std::abs(b) <= s1);
    for (double w : m.w2) CHECK(std::abs(w) <= s2);
    for (double b : m.b2) CHECK(std::abs(b) <= s2);
}

TEST_CASE("mlp backward matches finite differences on every parameter") {
    std::mt19937_64 rng(17);
    Mlp m(3, 4, 2);
    m.init(rng);
    const std::vector<double> x{0.3, -0.7, 1.2};
    const std::vector<double> dy{1.0, -0.5};

    auto loss = [&]() {
        std::vector<double> y(2);
        m.forward(x, y);
        return dy[0] * y[0] + dy[1] * y[1];
    };

    Mlp grad = m.zeros_like();
    Mlp::Trace trace;
    std::vector<double> y(2);
    m.forward(x, y, &trace);
    std::vector<double> dx(3, 0.0);
    m.backward(trace, dy, grad, dx);

    std::vector<double*> params, grads;
    m.collect_params(params);
    grad.collect_params(grads);
    REQUIRE(params.size() == grads.size());
    REQUIRE(params.size() == m.param_count());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double fd = central_diff(*params[i], loss);
        CHECK(rel_err(*grads[i], fd) <= 1e-5);
    }
    // input gradient too
    for (std::size_t i = 0; i < x.size(); ++i) {
        double xi = x[i];
        auto loss_x = [&]() {
            std::vector<double> xv = x;
            xv[i] = xi;
            std::vector<double> out(2);
            m.forward(xv, out);
            return dy[0] * out[0] + dy[1] * out[1];
        };
        const double fd = central_diff(xi, loss_x);
        CHECK(rel_err(dx[i], fd) <= 1e-5);
    }
}

TEST_CASE("mlp backward with softplus output matches finite differences") {
    std::mt19937_64 rng(31);
    Mlp m(1, 5, 1, OutputActivation::softplus);
    m.init(rng);
    const std::vector<double> x{1.7};
    auto loss = [&]() {
        std::vector<double> y(1);
        m.forward(x, y);
        return y[0];
    };
    Mlp grad = m.zeros_like();
    Mlp::Trace trace;
    std::vector<double> y(1);
    m.forward(x, y, &trace);
    m.backward(trace, std::vector<double>{1.0}, grad);

    std::vector<double*> params, grads;
    m.collect_params(params);
    grad.collect_params(grads);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double fd = central_diff(*params[i], loss);
        CHECK(rel_err(*grads[i], fd) <= 1e-5);
    }
}

TEST_CASE("mlp backward accumulates instead of overwriting") {
    std::mt19937_64 rng(3);
    Mlp m(2, 3, 1);
    m.init(rng);
    Mlp::Trace trace;
    std::vector<double> y(1);
    m.forward(std::vector<double>{0.5, 0.25}, y, &trace);

    Mlp once = m.zeros_like();
    m.backward(trace, std::vector<double>{1.0}, once);
    Mlp twice = m.zeros_like();
    m.backward(trace, std::vector<double>{1.0}, twice);
    m.backward(trace, std::vector<double>{1.0}, twice);
    std::vector<double*> g1, g2;
    once.collect_params(g1);
    twice.collect_params(g2);
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(*g2[i] == doctest::Approx(2.0 * *g1[i]).epsilon(1e-15));
}

TEST_CASE("analytic scalar maps match their closed forms") {
    const ScalarMap one = ScalarMap::analytic(ScalarKind::one);
    const ScalarMap ident = ScalarMap::analytic(ScalarKind::identity);
    const ScalarMap inv_log = ScalarMap::analytic(ScalarKind::inv_log);
    const ScalarMap inv_sqrt_log = ScalarMap::analytic(ScalarKind::inv_sqrt_log);
    const ScalarMap inv_sqrt = ScalarMap::analytic(ScalarKind::inv_sqrt);

    CHECK(one.value(3.7) == 1.0);
    CHECK(one.value(0.0) == 1.0);
    CHECK(ident.value(-2.5) == -2.5);
    CHECK(inv_log.value(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(inv_log.value(4.0) == doctest::Approx(1.0 / std::log(4.0)).epsilon(1e-12));
    CHECK(inv_sqrt_log.value(4.0) ==
          doctest::Approx(1.0 / std::sqrt(std::log(4.0))).epsilon(1e-12));
    CHECK(inv_sqrt.value(4.0) == 0.5);
    CHECK(inv_sqrt.value(0.25) == 2.0);

    // the degree <= 1 guard mirrors the classical skip rule
    CHECK(inv_log.value(1.0) == 0.0);
    CHECK(inv_log.value(0.5) == 0.0);
    CHECK(inv_log.value(0.0) == 0.0);
    CHECK(inv_sqrt_log.value(1.0) == 0.0);
    CHECK(inv_sqrt.value(0.0) == 0.0);
    CHECK(inv_sqrt.value(-1.0) == 0.0);
}

TEST_CASE("analytic slopes match finite differences away from the guards") {
    for (ScalarKind kind : {ScalarKind::identity, ScalarKind::one,
                            ScalarKind::inv_log, ScalarKind::inv_sqrt_log,
                            ScalarKind::inv_sqrt}) {
        const ScalarMap m = ScalarMap::analytic(kind);
        for (double x : {1.5, 2.0, 3.7, 10.0}) {
            double xv = x;
            auto f = [&]() { return m.value(xv); };
            const double fd = central_diff(xv, f, 1e-7);
            CHECK(rel_err(m.slope(x), fd) <= 1e-6);
        }
    }
}

TEST_CASE("trainable scalar map routes gradients through its mlp") {
    std::mt19937_64 rng(23);
    ScalarMap m = ScalarMap::trainable(6, rng);
    REQUIRE(m.is_trainable());
    const double x = 0.8;

    ScalarMap grad = m.zeros_like();
    const double dx = m.backward(x, 1.0, &grad);
    double xv = x;
    auto fx = [&]() { return m.value(xv); };
    CHECK(rel_err(dx, central_diff(xv, fx)) <= 1e-5);
    CHECK(rel_err(m.slope(x), central_diff(xv, fx)) <= 1e-5);

    std::vector<double*> params, grads;
    m.collect_params(params);
    grad.collect_params(grads);
    REQUIRE(params.size() == m.param_count());
    REQUIRE(params.size() == 6 * 1 + 6 + 1 * 6 + 1);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto f = [&]() { return m.value(x); };
        const double fd = central_diff(*params[i], f);
        CHECK(rel_err(*grads[i], fd) <= 1e-5);
    }
}

TEST_CASE("analytic maps expose no parameters") {
    ScalarMap m = ScalarMap::analytic(ScalarKind::inv_log);
    CHECK(m.param_count() == 0);
    std::vector<double*> params;
    m.collect_params(params);
    CHECK(params.empty());
    // backward still returns the input slope
    const double d = m.backward(4.0, 2.0, nullptr);
    CHECK(d == doctest::Approx(2.0 * m.slope(4.0)).epsilon(1e-15));
}

TEST_CASE("scalar kind names round-trip") {
    for (ScalarKind kind : {ScalarKind::mlp, ScalarKind::identity, ScalarKind::one,
                            ScalarKind::inv_log, ScalarKind::inv_sqrt_log,
                            ScalarKind::inv_sqrt})
        CHECK(scalar_kind_from_name(scalar_kind_name(kind)) == kind);
    CHECK_THROWS_AS(scalar_kind_from_name("nope"), DataError);
}
