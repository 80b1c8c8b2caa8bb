#include <doctest.h>

#include <cmath>
#include <functional>

#include "nirprompt/graph.hpp"
#include "nirprompt/rng.hpp"

using namespace nirprompt;

namespace {

Matrix random_matrix(Rng& rng, int r, int c, double scale = 0.5) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, scale);
    return m;
}

// Central finite differences against the analytic gradient for a scalar
// loss of several parameters.
double max_grad_error(std::vector<Parameter*> params, const std::function<double()>& loss_value,
                      const std::function<void()>& loss_backward) {
    for (Parameter* p : params) p->zero_grad();
    loss_backward();
    const double h = 1e-5;
    double worst = 0.0;
    for (Parameter* p : params) {
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
                double orig = p->value(i, j);
                p->value(i, j) = orig + h;
                double up = loss_value();
                p->value(i, j) = orig - h;
                double down = loss_value();
                p->value(i, j) = orig;
                double fd = (up - down) / (2.0 * h);
                double an = p->grad(i, j);
                double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
                worst = std::max(worst, std::abs(fd - an) / denom);
            }
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("composite graph gradients match finite differences") {
    Rng rng(11);
    Parameter A("A", random_matrix(rng, 3, 5)), B("B", random_matrix(rng, 5, 5)),
        gamma("g", Matrix::Ones(1, 5)), beta("b", random_matrix(rng, 1, 5)),
        R("R", random_matrix(rng, 1, 5)), W("W", random_matrix(rng, 5, 2));

    auto build = [&](Graph& g) {
        Var x = g.matmul(g.param(A), g.param(B));
        x = g.layer_norm_rows(x, g.param(gamma), g.param(beta), 1e-5);
        x = g.gelu(x);
        x = g.replace_rows(x, {1}, g.param(R));
        Var s = g.softmax_rows(g.scale(g.matmul(x, g.transpose(x)), 0.6));
        Var t = g.sigmoid(g.matmul(g.tanh_fn(g.matmul(s, x)), g.param(W)));
        Var lse = g.log_sum_exp_rows(t);
        Var d = g.diag_col(g.matmul(t, g.transpose(t)));
        Var p = g.div(g.pick(t, 0, 0), g.add(g.pick(t, 0, 0), g.pick(t, 2, 1)));
        Var parts = g.concat_cols({lse, d});
        Var gath = g.sum_all(g.gather_rows(g.param(A), {0, 2, 0}));
        return g.add(g.add(g.mean_all(g.mul(parts, parts)), g.scale(g.log_fn(p), -0.25)), gath);
    };

    auto value = [&]() {
        Graph g;
        return g.value(build(g))(0, 0);
    };
    auto backward = [&]() {
        Graph g;
        g.backward(build(g));
    };

    double err = max_grad_error({&A, &B, &gamma, &beta, &R, &W}, value, backward);
    CHECK(err < 1e-4);
}

TEST_CASE("replace_rows blocks gradient into replaced base rows") {
    Parameter base("base", Matrix::Ones(3, 2));
    Parameter rows("rows", Matrix::Constant(1, 2, 5.0));
    Graph g;
    Var out = g.replace_rows(g.param(base), {1}, g.param(rows));
    CHECK(g.value(out)(1, 0) == 5.0);
    CHECK(g.value(out)(0, 0) == 1.0);
    g.backward(g.sum_all(out));
    CHECK(base.grad(0, 0) == 1.0);
    CHECK(base.grad(1, 0) == 0.0);  // replaced row contributes nothing
    CHECK(base.grad(2, 1) == 1.0);
    CHECK(rows.grad(0, 0) == 1.0);
}

TEST_CASE("graph evaluation is deterministic") {
    Rng rng(3);
    Matrix a = random_matrix(rng, 4, 4);
    auto run = [&]() {
        Graph g;
        Var x = g.softmax_rows(g.constant(a));
        Var y = g.matmul(x, g.transpose(x));
        return Matrix(g.value(g.layer_norm_rows(y, g.constant(Matrix::Ones(1, 4)),
                                                g.constant(Matrix::Zero(1, 4)), 1e-5)));
    };
    Matrix first = run();
    Matrix second = run();
    CHECK((first - second).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("softmax rows are shift invariant and normalized") {
    Rng rng(5);
    Matrix a = random_matrix(rng, 2, 6, 2.0);
    Matrix shifted = a;
    shifted.row(0).array() += 13.5;
    shifted.row(1).array() -= 2.25;
    Graph g;
    Matrix sa = g.value(g.softmax_rows(g.constant(a)));
    Matrix sb = g.value(g.softmax_rows(g.constant(shifted)));
    CHECK((sa - sb).cwiseAbs().maxCoeff() < 1e-12);
    for (int r = 0; r < 2; ++r) CHECK(std::abs(sa.row(r).sum() - 1.0) < 1e-12);
}
