#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace nirprompt {

using Matrix = Eigen::MatrixXd;

// Named trainable tensor. Gradients accumulate across backward calls until
// zero_grad(); optimizers read value/grad pairs through ParameterGroup.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Matrix v)
        : name(std::move(n)), value(std::move(v)),
          grad(Matrix::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
};

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense double matrices. One Graph instance per
// forward pass; backward() accumulates into the Parameters referenced by
// param() leaves. Single-threaded, evaluation order is fixed by op order,
// so results are bit-reproducible.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Matrix v);
    Var param(Parameter& p);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);        // elementwise
    Var div(Var a, Var b);        // elementwise
    Var matmul(Var a, Var b);
    Var scale(Var a, double s);
    Var transpose(Var a);
    Var add_row_broadcast(Var m, Var row);  // row: 1 x C added to every row of m

    Var slice_rows(Var a, int start, int count);
    Var slice_cols(Var a, int start, int count);
    Var row(Var a, int i);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var gather_rows(Var table, std::vector<int> ids);
    // Copy of `base` with row `positions[i]` replaced by `rows` row i.
    // Gradient flows to `rows` at replaced positions and to `base` elsewhere.
    Var replace_rows(Var base, std::vector<int> positions, Var rows);

    Var reshape(Var a, int rows, int cols);  // row-major element order
    Var softmax_rows(Var a);
    Var log_sum_exp_rows(Var a);  // N x C -> N x 1
    Var diag_col(Var a);          // N x N -> N x 1
    Var layer_norm_rows(Var x, Var gamma, Var beta, double eps);
    Var tanh_fn(Var a);
    Var sigmoid(Var a);
    Var gelu(Var a);
    Var log_fn(Var a);
    Var pick(Var a, int i, int j);  // 1 x 1
    Var sum_all(Var a);             // 1 x 1
    Var mean_all(Var a);            // 1 x 1

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    const Matrix& grad_of(Var v) const { return nodes_[v.id].grad; }
    size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
    // `loss` must be 1 x 1.
    void backward(Var loss);

private:
    struct Node {
        Matrix value;
        Matrix grad;  // allocated lazily during backward
        std::function<void(Graph&, int)> back;
        Parameter* leaf = nullptr;
    };

    Var make(Matrix value, std::function<void(Graph&, int)> back);
    Matrix& grad_ref(int id);
    bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }

    std::vector<Node> nodes_;
};

}  // namespace nirprompt
