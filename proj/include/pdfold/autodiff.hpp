#pragma once

#include <functional>
#include <vector>

#include "pdfold/mat.hpp"

namespace pdfold::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
struct Var {
    int idx = -1;
    Tape* tape = nullptr;
    bool valid() const { return idx >= 0 && tape != nullptr; }
};

// Reverse-mode differentiation tape over dense matrices. One tape per
// forward/backward evaluation; nodes are appended in topological order, so
// the backward pass is a single reverse sweep.
class Tape {
public:
    Var leaf(Mat value);

    const Mat& value(Var v) const;
    const Mat& grad(Var v) const;

    // Seeds the root (must be 1x1) with 1 and accumulates vector-Jacobian
    // products into every node. A second call without a fresh tape throws.
    void backward(Var root);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void(Tape&)> backprop;
    };
    std::vector<Node> nodes_;
    bool backward_done_ = false;

    Var push(Mat value, std::function<void(Tape&)> backprop);
    void set_backprop(int idx, std::function<void(Tape&)> fn);
    Mat& grad_mut(int idx) { return nodes_[idx].grad; }

    friend Var make_node(Tape& t, Mat value, std::function<void(Tape&)> backprop);
    friend void set_node_backprop(Tape& t, int idx, std::function<void(Tape&)> fn);
    friend Mat& node_grad(Tape& t, int idx);
};

// Elementwise arithmetic (same-shape operands).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

// Fixed-coefficient map a*X + b (coefficients are not differentiated).
Var affine(Var x, double scale, double shift);
Var neg(Var x);

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, int rows, int cols);
Var concat_cols(Var a, Var b);

// Nonlinearities. relu and abs use subgradient 0 at the kink.
Var relu(Var x);
Var sigmoid(Var x);
Var softsign(Var x, double temperature);  // 1/(1+exp(-k*x))
Var abs(Var x);
Var exp(Var x);
Var log(Var x);
Var softplus(Var x);
Var softmax_rows(Var x);
Var clip_max1(Var x);  // 1 - relu(1 - x), i.e. min(x, 1)

// Reductions and scalar plumbing (scalars are 1x1 nodes).
Var row_sum(Var x);               // LxC -> Lx1
Var full_sum(Var x);              // -> 1x1
Var inner_product(Var a, Var b);  // <a, b> -> 1x1
Var scale_by(Var scalar, Var x);  // scalar * X, both differentiable
Var sub_scalar(Var x, Var scalar);
Var pow_int(Var scalar, int n);

// Rows i*L+j of the result hold [X(i,:), X(j,:)]; used for pairwise scoring.
Var pair_concat(Var x);

// Max relative error between analytic gradient and a central finite
// difference, per coordinate, relative to max(1, |fd|). The builder must be
// pure: same (tape, leaf) in, same scalar out.
double check_gradient(const std::function<Var(Tape&, Var)>& f, const Mat& x,
                      double eps = 1e-5);

}  // namespace pdfold::ad
