#include "nirprompt/graph.hpp"

#include <cmath>

#include "nirprompt/errors.hpp"

namespace nirprompt {

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var Graph::make(Matrix value, std::function<void(Graph&, int)> back) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(back), nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Graph::grad_ref(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

Var Graph::constant(Matrix v) { return make(std::move(v), nullptr); }

Var Graph::param(Parameter& p) {
    Var v = make(p.value, nullptr);
    nodes_[v.id].leaf = &p;
    return v;
}

Var Graph::add(Var a, Var b) {
    return make(nodes_[a.id].value + nodes_[b.id].value, [a, b](Graph& g, int self) {
        const Matrix& go = g.nodes_[self].grad;
        g.grad_ref(a.id) += go;
        g.grad_ref(b.id) += go;
    });
}

Var Graph::sub(Var a, Var b) {
    return make(nodes_[a.id].value - nodes_[b.id].value, [a, b](Graph& g, int self) {
        const Matrix& go = g.nodes_[self].grad;
        g.grad_ref(a.id) += go;
        g.grad_ref(b.id) -= go;
    });
}

Var Graph::mul(Var a, Var b) {
    return make(nodes_[a.id].value.cwiseProduct(nodes_[b.id].value),
                [a, b](Graph& g, int self) {
                    const Matrix& go = g.nodes_[self].grad;
                    g.grad_ref(a.id) += go.cwiseProduct(g.nodes_[b.id].value);
                    g.grad_ref(b.id) += go.cwiseProduct(g.nodes_[a.id].value);
                });
}

Var Graph::div(Var a, Var b) {
    return make(nodes_[a.id].value.cwiseQuotient(nodes_[b.id].value),
                [a, b](Graph& g, int self) {
                    const Matrix& go = g.nodes_[self].grad;
                    const Matrix& bv = g.nodes_[b.id].value;
                    const Matrix& out = g.nodes_[self].value;
                    g.grad_ref(a.id) += go.cwiseQuotient(bv);
                    g.grad_ref(b.id) -= go.cwiseProduct(out).cwiseQuotient(bv);
                });
}

Var Graph::matmul(Var a, Var b) {
    return make(nodes_[a.id].value * nodes_[b.id].value, [a, b](Graph& g, int self) {
        const Matrix& go = g.nodes_[self].grad;
        g.grad_ref(a.id).noalias() += go * g.nodes_[b.id].value.transpose();
        g.grad_ref(b.id).noalias() += g.nodes_[a.id].value.transpose() * go;
    });
}

Var Graph::scale(Var a, double s) {
    return make(nodes_[a.id].value * s, [a, s](Graph& g, int self) {
        g.grad_ref(a.id) += g.nodes_[self].grad * s;
    });
}

Var Graph::transpose(Var a) {
    return make(nodes_[a.id].value.transpose(), [a](Graph& g, int self) {
        g.grad_ref(a.id) += g.nodes_[self].grad.transpose();
    });
}

Var Graph::add_row_broadcast(Var m, Var rowv) {
    const Matrix& mv = nodes_[m.id].value;
    const Matrix& rv = nodes_[rowv.id].value;
    Matrix out = mv;
    out.rowwise() += rv.row(0);
    return make(std::move(out), [m, rowv](Graph& g, int self) {
        const Matrix& go = g.nodes_[self].grad;
        g.grad_ref(m.id) += go;
        g.grad_ref(rowv.id) += go.colwise().sum();
    });
}

Var Graph::slice_rows(Var a, int start, int count) {
    return make(nodes_[a.id].value.middleRows(start, count),
                [a, start, count](Graph& g, int self) {
                    g.grad_ref(a.id).middleRows(start, count) += g.nodes_[self].grad;
                });
}

Var Graph::slice_cols(Var a, int start, int count) {
    return make(nodes_[a.id].value.middleCols(start, count),
                [a, start, count](Graph& g, int self) {
                    g.grad_ref(a.id).middleCols(start, count) += g.nodes_[self].grad;
                });
}

Var Graph::row(Var a, int i) { return slice_rows(a, i, 1); }

Var Graph::concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "internal", "concat_rows on empty list");
    Eigen::Index rows = 0;
    const Eigen::Index cols = nodes_[parts[0].id].value.cols();
    for (Var p : parts) rows += nodes_[p.id].value.rows();
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        const Matrix& v = nodes_[p.id].value;
        out.middleRows(at, v.rows()) = v;
        at += v.rows();
    }
    return make(std::move(out), [parts](Graph& g, int self) {
        const Matrix& go = g.nodes_[self].grad;
        Eigen::Index at = 0;
        for (Var p : parts) {
            Eigen::Index r = g.nodes_[p.id].value.rows();
            g.grad_ref(p.id) += go.middleRows(at, r);
            at += r;
        }
    });
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "internal", "concat_cols on empty list");
    Eigen::Index cols = 0;
    const Eigen::Index rows = nodes_[parts[0].id].value.rows();
    for (Var p : parts) cols += nodes_[p.id].value.cols();
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        const Matrix& v = nodes_[p.id].value;
        out.middleCols(at, v.cols()) = v;
        at += v.cols();
    }
    return make(std::move(out), [parts](Graph& g, int self) {
        const Matrix& go = g.nodes_[self].grad;
        Eigen::Index at = 0;
        for (Var p : parts) {
            Eigen::Index c = g.nodes_[p.id].value.cols();
            g.grad_ref(p.id) += go.middleCols(at, c);
            at += c;
        }
    });
}

Var Graph::gather_rows(Var table, std::vector<int> ids) {
    const Matrix& t = nodes_[table.id].value;
    Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
    for (size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
    return make(std::move(out), [table, ids = std::move(ids)](Graph& g, int self) {
        const Matrix& go = g.nodes_[self].grad;
        Matrix& gt = g.grad_ref(table.id);
        for (size_t i = 0; i < ids.size(); ++i)
            gt.row(ids[i]) += go.row(static_cast<Eigen::Index>(i));
    });
}

Var Graph::replace_rows(Var base, std::vector<int> positions, Var rows) {
    Matrix out = nodes_[base.id].value;
    const Matrix& rv = nodes_[rows.id].value;
    for (size_t i = 0; i < positions.size(); ++i)
        out.row(positions[i]) = rv.row(static_cast<Eigen::Index>(i));
    return make(std::move(out),
                [base, positions = std::move(positions), rows](Graph& g, int self) {
                    Matrix go = g.nodes_[self].grad;  // copy; replaced rows are masked out
                    Matrix& gr = g.grad_ref(rows.id);
                    for (size_t i = 0; i < positions.size(); ++i) {
                        gr.row(static_cast<Eigen::Index>(i)) += go.row(positions[i]);
                        go.row(positions[i]).setZero();
                    }
                    g.grad_ref(base.id) += go;
                });
}

Var Graph::reshape(Var a, int rows, int cols) {
    const Matrix& x = nodes_[a.id].value;
    require(rows * cols == x.size(), "internal", "reshape size mismatch");
    Matrix out(rows, cols);
    Eigen::Index flat = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j, ++flat)
            out(flat / cols, flat % cols) = x(i, j);
    return make(std::move(out), [a, cols](Graph& g, int self) {
        const Matrix& go = g.nodes_[self].grad;
        Matrix& ga = g.grad_ref(a.id);
        Eigen::Index flat = 0;
        for (Eigen::Index i = 0; i < ga.rows(); ++i)
            for (Eigen::Index j = 0; j < ga.cols(); ++j, ++flat)
                ga(i, j) += go(flat / cols, flat % cols);
    });
}

Var Graph::softmax_rows(Var a) {
    const Matrix& x = nodes_[a.id].value;
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double mx = x.row(r).maxCoeff();
        Eigen::ArrayXd e = (x.row(r).array() - mx).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return make(std::move(out), [a](Graph& g, int self) {
        const Matrix& s = g.nodes_[self].value;
        const Matrix& go = g.nodes_[self].grad;
        Matrix& ga = g.grad_ref(a.id);
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            double dot = go.row(r).cwiseProduct(s.row(r)).sum();
            ga.row(r) += s.row(r).cwiseProduct((go.row(r).array() - dot).matrix());
        }
    });
}

Var Graph::log_sum_exp_rows(Var a) {
    const Matrix& x = nodes_[a.id].value;
    Matrix out(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double mx = x.row(r).maxCoeff();
        out(r, 0) = mx + std::log((x.row(r).array() - mx).exp().sum());
    }
    return make(std::move(out), [a](Graph& g, int self) {
        const Matrix& x = g.nodes_[a.id].value;
        const Matrix& lse = g.nodes_[self].value;
        const Matrix& go = g.nodes_[self].grad;
        Matrix& ga = g.grad_ref(a.id);
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            ga.row(r) += go(r, 0) * (x.row(r).array() - lse(r, 0)).exp().matrix();
    });
}

Var Graph::diag_col(Var a) {
    const Matrix& x = nodes_[a.id].value;
    require(x.rows() == x.cols(), "internal", "diag_col needs a square matrix");
    Matrix out = x.diagonal();
    return make(std::move(out), [a](Graph& g, int self) {
        const Matrix& go = g.nodes_[self].grad;
        Matrix& ga = g.grad_ref(a.id);
        for (Eigen::Index r = 0; r < go.rows(); ++r) ga(r, r) += go(r, 0);
    });
}

Var Graph::layer_norm_rows(Var xv, Var gamma, Var beta, double eps) {
    using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
    const Matrix& x = nodes_[xv.id].value;
    const Matrix& gm = nodes_[gamma.id].value;
    const Matrix& bt = nodes_[beta.id].value;
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double mu = x.row(r).mean();
        RowArray cent = x.row(r).array() - mu;
        double inv = 1.0 / std::sqrt(cent.square().mean() + eps);
        out.row(r) = (cent * inv * gm.row(0).array()).matrix() + bt.row(0);
    }
    return make(std::move(out), [xv, gamma, beta, eps](Graph& g, int self) {
        using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
        const Matrix& x = g.nodes_[xv.id].value;
        const Matrix& gm = g.nodes_[gamma.id].value;
        const Matrix& go = g.nodes_[self].grad;
        Matrix& gx = g.grad_ref(xv.id);
        Matrix& gg = g.grad_ref(gamma.id);
        Matrix& gb = g.grad_ref(beta.id);
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            double mu = x.row(r).mean();
            RowArray cent = x.row(r).array() - mu;
            double inv = 1.0 / std::sqrt(cent.square().mean() + eps);
            RowArray xhat = cent * inv;
            RowArray grow = go.row(r).array();
            gb.row(0) += go.row(r);
            gg.row(0) += (grow * xhat).matrix();
            RowArray dxhat = grow * gm.row(0).array();
            double m1 = dxhat.mean();
            double m2 = (dxhat * xhat).mean();
            gx.row(r) += (inv * (dxhat - m1 - xhat * m2)).matrix();
        }
    });
}

Var Graph::tanh_fn(Var a) {
    return make(nodes_[a.id].value.array().tanh().matrix(), [a](Graph& g, int self) {
        const Matrix& y = g.nodes_[self].value;
        g.grad_ref(a.id) +=
            g.nodes_[self].grad.cwiseProduct((1.0 - y.array().square()).matrix());
    });
}

Var Graph::sigmoid(Var a) {
    Matrix out = (1.0 / (1.0 + (-nodes_[a.id].value.array()).exp())).matrix();
    return make(std::move(out), [a](Graph& g, int self) {
        const Matrix& y = g.nodes_[self].value;
        g.grad_ref(a.id) +=
            g.nodes_[self].grad.cwiseProduct((y.array() * (1.0 - y.array())).matrix());
    });
}

Var Graph::gelu(Var a) {
    const Eigen::ArrayXXd x = nodes_[a.id].value.array();
    Eigen::ArrayXXd t = (kGeluC * (x + kGeluA * x.cube())).tanh();
    return make((0.5 * x * (1.0 + t)).matrix(), [a](Graph& g, int self) {
        const Eigen::ArrayXXd x = g.nodes_[a.id].value.array();
        Eigen::ArrayXXd t = (kGeluC * (x + kGeluA * x.cube())).tanh();
        Eigen::ArrayXXd d =
            0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * kGeluA * x.square());
        g.grad_ref(a.id) += g.nodes_[self].grad.cwiseProduct(d.matrix());
    });
}

Var Graph::log_fn(Var a) {
    return make(nodes_[a.id].value.array().log().matrix(), [a](Graph& g, int self) {
        g.grad_ref(a.id) +=
            g.nodes_[self].grad.cwiseQuotient(g.nodes_[a.id].value);
    });
}

Var Graph::pick(Var a, int i, int j) {
    Matrix out(1, 1);
    out(0, 0) = nodes_[a.id].value(i, j);
    return make(std::move(out), [a, i, j](Graph& g, int self) {
        g.grad_ref(a.id)(i, j) += g.nodes_[self].grad(0, 0);
    });
}

Var Graph::sum_all(Var a) {
    Matrix out(1, 1);
    out(0, 0) = nodes_[a.id].value.sum();
    return make(std::move(out), [a](Graph& g, int self) {
        g.grad_ref(a.id).array() += g.nodes_[self].grad(0, 0);
    });
}

Var Graph::mean_all(Var a) {
    const auto n = static_cast<double>(nodes_[a.id].value.size());
    Matrix out(1, 1);
    out(0, 0) = nodes_[a.id].value.sum() / n;
    return make(std::move(out), [a, n](Graph& g, int self) {
        g.grad_ref(a.id).array() += g.nodes_[self].grad(0, 0) / n;
    });
}

void Graph::backward(Var loss) {
    require(loss.valid() && nodes_[loss.id].value.size() == 1, "internal",
            "backward needs a scalar loss node");
    grad_ref(loss.id)(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!has_grad(i)) continue;
        if (n.leaf != nullptr) n.leaf->grad += n.grad;
        if (n.back) n.back(*this, i);
    }
}

}  // namespace nirprompt
