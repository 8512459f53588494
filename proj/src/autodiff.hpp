#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace gebc::ad {

// A trainable tensor with its accumulated gradient. Lives outside any graph;
// graphs reference parameters and write into .grad during backward.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string n, int r, int c) : name(std::move(n)), value(r, c), grad(r, c) {}
    void zero_grad() { grad.fill(0.0); }
};

class Graph;

struct Node {
    Tensor owned;                     // storage for computed values
    const Tensor* val = nullptr;      // points at owned or at external storage
    Tensor grad;                      // allocated on first gradient received
    bool needs_grad = false;
    std::function<void()> back;

    const Tensor& v() const { return *val; }
    int rows() const { return val->rows; }
    int cols() const { return val->cols; }
};

using Var = Node*;

// Dynamically built computation DAG. One graph per forward pass; node
// creation order is a topological order, so backward() just walks it in
// reverse. With grad_enabled=false no backward closures are recorded, which
// makes finite-difference sweeps cheap.
class Graph {
public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Var input(Tensor t);                   // leaf holding a copy, no gradient
    Var input_ref(const Tensor* t);        // leaf aliasing caller storage, no gradient
    Var param(Parameter& p);               // leaf; backward accumulates into p.grad

    // loss must be 1x1; seeds d(loss)/d(loss) = seed.
    void backward(Var loss, double seed = 1.0);

    bool grad_enabled() const { return grad_enabled_; }
    Node* make(int rows, int cols, bool needs_grad);
    static Tensor& grad_buf(Node* n);

private:
    std::deque<std::unique_ptr<Node>> nodes_;
    bool grad_enabled_ = true;
};

Var matmul(Graph& g, Var a, Var b);
Var matmul_nt(Graph& g, Var a, Var b);  // a * b^T
Var add(Graph& g, Var a, Var b);
Var add_row(Graph& g, Var a, Var row);  // broadcast a 1xC row over all rows of a
Var scale(Graph& g, Var a, double s);
Var mul(Graph& g, Var a, Var b);
Var relu(Graph& g, Var a);
Var sigmoid(Graph& g, Var a);
Var tanh_act(Graph& g, Var a);
Var clamp(Graph& g, Var a, double lo, double hi);
Var concat_cols(Graph& g, const std::vector<Var>& parts);
Var slice_cols(Graph& g, Var a, int c0, int c1);
Var select_rows(Graph& g, Var table, std::vector<int> ids);
Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps);
Var layer_norm_plain(Graph& g, Var x, double eps);

// Softmax over consecutive column groups of size `group` within each row.
// group == cols gives a plain row softmax.
Var softmax_groups(Graph& g, Var a, int group);

// Row softmax over the positions where allowed != 0; fully masked rows
// produce an all-zero row instead of NaN.
Var masked_softmax_rows(Graph& g, Var scores, std::vector<uint8_t> allowed);

// out.row(i) = use_true[i] ? when_true.row(i) : when_false.row(i)
Var blend_rows(Graph& g, Var when_true, Var when_false, std::vector<uint8_t> use_true);

// 1-D deformable sampling. values is (L x D) with D = heads * head_dim laid
// out head-major; positions is (Q x heads*points) of fractional row indices
// in [0, L-1]. Output is (Q x heads*points*head_dim): per (query, head,
// point) the linearly interpolated head slice. Differentiable in both values
// and positions.
Var deform_sample(Graph& g, Var values, Var positions, int heads, int points);

// Mixes sampled points with per-(query, head) weights: sampled is
// (Q x heads*points*head_dim), weights (Q x heads*points); output (Q x D).
Var point_mix(Graph& g, Var sampled, Var weights, int heads, int points);

Var sum_all(Graph& g, Var a);  // 1x1

// Sum over rows with mask != 0 of row_weight[r] * -log softmax(logits[r])[target[r]].
// Masked-out rows contribute exactly zero, forward and backward.
Var cross_entropy_sum(Graph& g, Var logits, std::vector<int> targets, std::vector<uint8_t> mask,
                      std::vector<double> row_weights = {});

}  // namespace gebc::ad
