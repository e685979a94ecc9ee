#include "pdfold/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace pdfold::ad {

namespace {

void check_same_tape(Var a, Var b, const char* op) {
    if (a.tape != b.tape)
        throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus_scalar(double x) {
    // max(x,0) + log1p(exp(-|x|)), stable at both tails
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

void acc(Mat& dst, const Mat& src) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

}  // namespace

Var make_node(Tape& t, Mat value, std::function<void(Tape&)> backprop) {
    return t.push(std::move(value), std::move(backprop));
}

void set_node_backprop(Tape& t, int idx, std::function<void(Tape&)> fn) {
    t.set_backprop(idx, std::move(fn));
}

Mat& node_grad(Tape& t, int idx) { return t.grad_mut(idx); }

Var Tape::push(Mat value, std::function<void(Tape&)> backprop) {
    nodes_.push_back(Node{std::move(value), Mat(), std::move(backprop)});
    return Var{static_cast<int>(nodes_.size()) - 1, this};
}

void Tape::set_backprop(int idx, std::function<void(Tape&)> fn) {
    nodes_.at(idx).backprop = std::move(fn);
}

Var Tape::leaf(Mat value) { return push(std::move(value), nullptr); }

const Mat& Tape::value(Var v) const { return nodes_.at(v.idx).value; }

const Mat& Tape::grad(Var v) const {
    const Mat& g = nodes_.at(v.idx).grad;
    if (g.size() == 0) throw std::logic_error("Tape::grad: backward has not been run");
    return g;
}

void Tape::backward(Var root) {
    if (root.tape != this) throw std::invalid_argument("backward: root from a different tape");
    if (backward_done_)
        throw std::logic_error("backward: already run on this tape; build a fresh tape");
    const Mat& rv = nodes_.at(root.idx).value;
    if (!rv.is_scalar()) throw std::invalid_argument("backward: root must be a 1x1 scalar");
    backward_done_ = true;
    for (auto& n : nodes_) n.grad = Mat(n.value.rows(), n.value.cols());
    nodes_[root.idx].grad(0, 0) = 1.0;
    for (int i = root.idx; i >= 0; --i)
        if (nodes_[i].backprop) nodes_[i].backprop(*this);
}

namespace {

// Creates a node and wires a backward closure that sees its own gradient.
template <typename Fn>
Var unary_op(Var a, Mat value, Fn&& pull) {
    Tape& t = *a.tape;
    Var out = make_node(t, std::move(value), nullptr);
    const int self = out.idx, ia = a.idx;
    set_node_backprop(t, self, [self, ia, pull](Tape& t) {
        pull(node_grad(t, self), node_grad(t, ia), t);
    });
    return out;
}

template <typename Fn>
Var binary_op(Var a, Var b, Mat value, Fn&& pull) {
    Tape& t = *a.tape;
    Var out = make_node(t, std::move(value), nullptr);
    const int self = out.idx, ia = a.idx, ib = b.idx;
    set_node_backprop(t, self, [self, ia, ib, pull](Tape& t) {
        pull(node_grad(t, self), node_grad(t, ia), node_grad(t, ib), t);
    });
    return out;
}

}  // namespace

// ---- elementwise arithmetic ----

Var add(Var a, Var b) {
    check_same_tape(a, b, "add");
    Tape& t = *a.tape;
    return binary_op(a, b, pdfold::add(t.value(a), t.value(b)),
                     [](const Mat& g, Mat& ga, Mat& gb, Tape&) {
                         acc(ga, g);
                         acc(gb, g);
                     });
}

Var sub(Var a, Var b) {
    check_same_tape(a, b, "sub");
    Tape& t = *a.tape;
    return binary_op(a, b, pdfold::sub(t.value(a), t.value(b)),
                     [](const Mat& g, Mat& ga, Mat& gb, Tape&) {
                         acc(ga, g);
                         for (std::size_t k = 0; k < gb.size(); ++k) gb[k] -= g[k];
                     });
}

Var mul(Var a, Var b) {
    check_same_tape(a, b, "mul");
    Tape& t = *a.tape;
    const Mat va = t.value(a), vb = t.value(b);
    return binary_op(a, b, hadamard(va, vb),
                     [va, vb](const Mat& g, Mat& ga, Mat& gb, Tape&) {
                         for (std::size_t k = 0; k < g.size(); ++k) {
                             ga[k] += g[k] * vb[k];
                             gb[k] += g[k] * va[k];
                         }
                     });
}

Var div(Var a, Var b) {
    check_same_tape(a, b, "div");
    Tape& t = *a.tape;
    const Mat va = t.value(a), vb = t.value(b);
    check_same_shape(va, vb, "div");
    Mat v = va;
    for (std::size_t k = 0; k < v.size(); ++k) v[k] /= vb[k];
    return binary_op(a, b, std::move(v),
                     [va, vb](const Mat& g, Mat& ga, Mat& gb, Tape&) {
                         for (std::size_t k = 0; k < g.size(); ++k) {
                             ga[k] += g[k] / vb[k];
                             gb[k] -= g[k] * va[k] / (vb[k] * vb[k]);
                         }
                     });
}

Var affine(Var x, double scale, double shift) {
    Tape& t = *x.tape;
    Mat v = t.value(x);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = scale * v[k] + shift;
    return unary_op(x, std::move(v), [scale](const Mat& g, Mat& gx, Tape&) {
        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += scale * g[k];
    });
}

Var neg(Var x) { return affine(x, -1.0, 0.0); }

// ---- shape ops ----

Var matmul(Var a, Var b) {
    check_same_tape(a, b, "matmul");
    Tape& t = *a.tape;
    const Mat va = t.value(a), vb = t.value(b);
    return binary_op(a, b, pdfold::matmul(va, vb),
                     [va, vb](const Mat& g, Mat& ga, Mat& gb, Tape&) {
                         acc(ga, pdfold::matmul(g, vb.t()));
                         acc(gb, pdfold::matmul(va.t(), g));
                     });
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    return unary_op(a, t.value(a).t(),
                    [](const Mat& g, Mat& ga, Tape&) { acc(ga, g.t()); });
}

Var reshape(Var a, int rows, int cols) {
    Tape& t = *a.tape;
    const Mat& va = t.value(a);
    if (static_cast<std::size_t>(rows) * cols != va.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Mat v(rows, cols, std::vector<double>(va.vec()));
    return unary_op(a, std::move(v), [](const Mat& g, Mat& ga, Tape&) {
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k];
    });
}

Var concat_cols(Var a, Var b) {
    check_same_tape(a, b, "concat_cols");
    Tape& t = *a.tape;
    const Mat& va = t.value(a);
    const Mat& vb = t.value(b);
    if (va.rows() != vb.rows()) throw std::invalid_argument("concat_cols: row count mismatch");
    const int ca = va.cols(), cb = vb.cols();
    Mat v(va.rows(), ca + cb);
    for (int i = 0; i < va.rows(); ++i) {
        for (int j = 0; j < ca; ++j) v(i, j) = va(i, j);
        for (int j = 0; j < cb; ++j) v(i, ca + j) = vb(i, j);
    }
    return binary_op(a, b, std::move(v),
                     [ca, cb](const Mat& g, Mat& ga, Mat& gb, Tape&) {
                         for (int i = 0; i < g.rows(); ++i) {
                             for (int j = 0; j < ca; ++j) ga(i, j) += g(i, j);
                             for (int j = 0; j < cb; ++j) gb(i, j) += g(i, ca + j);
                         }
                     });
}

Var pair_concat(Var x) {
    Tape& t = *x.tape;
    const Mat& vx = t.value(x);
    const int L = vx.rows(), c = vx.cols();
    Mat v(L * L, 2 * c);
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < L; ++j) {
            const int r = i * L + j;
            for (int k = 0; k < c; ++k) {
                v(r, k) = vx(i, k);
                v(r, c + k) = vx(j, k);
            }
        }
    }
    return unary_op(x, std::move(v), [L, c](const Mat& g, Mat& gx, Tape&) {
        for (int i = 0; i < L; ++i) {
            for (int j = 0; j < L; ++j) {
                const int r = i * L + j;
                for (int k = 0; k < c; ++k) {
                    gx(i, k) += g(r, k);
                    gx(j, k) += g(r, c + k);
                }
            }
        }
    });
}

// ---- nonlinearities ----

Var relu(Var x) {
    Tape& t = *x.tape;
    Mat v = t.value(x);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = v[k] > 0.0 ? v[k] : 0.0;
    const Mat vx = t.value(x);
    return unary_op(x, std::move(v), [vx](const Mat& g, Mat& gx, Tape&) {
        for (std::size_t k = 0; k < gx.size(); ++k)
            if (vx[k] > 0.0) gx[k] += g[k];
    });
}

Var sigmoid(Var x) {
    Tape& t = *x.tape;
    Mat v = t.value(x);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = sigmoid_scalar(v[k]);
    const Mat s = v;
    return unary_op(x, std::move(v), [s](const Mat& g, Mat& gx, Tape&) {
        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += g[k] * s[k] * (1.0 - s[k]);
    });
}

Var softsign(Var x, double temperature) {
    if (temperature <= 0.0) throw std::invalid_argument("softsign: temperature must be > 0");
    Tape& t = *x.tape;
    Mat v = t.value(x);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = sigmoid_scalar(temperature * v[k]);
    const Mat s = v;
    return unary_op(x, std::move(v), [s, temperature](const Mat& g, Mat& gx, Tape&) {
        for (std::size_t k = 0; k < gx.size(); ++k)
            gx[k] += g[k] * temperature * s[k] * (1.0 - s[k]);
    });
}

Var abs(Var x) {
    Tape& t = *x.tape;
    Mat v = t.value(x);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::fabs(v[k]);
    const Mat vx = t.value(x);
    return unary_op(x, std::move(v), [vx](const Mat& g, Mat& gx, Tape&) {
        for (std::size_t k = 0; k < gx.size(); ++k) {
            if (vx[k] > 0.0)
                gx[k] += g[k];
            else if (vx[k] < 0.0)
                gx[k] -= g[k];
        }
    });
}

Var exp(Var x) {
    Tape& t = *x.tape;
    Mat v = t.value(x);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::exp(v[k]);
    const Mat e = v;
    return unary_op(x, std::move(v), [e](const Mat& g, Mat& gx, Tape&) {
        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += g[k] * e[k];
    });
}

Var log(Var x) {
    Tape& t = *x.tape;
    Mat v = t.value(x);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::log(v[k]);
    const Mat vx = t.value(x);
    return unary_op(x, std::move(v), [vx](const Mat& g, Mat& gx, Tape&) {
        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += g[k] / vx[k];
    });
}

Var softplus(Var x) {
    Tape& t = *x.tape;
    Mat v = t.value(x);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = softplus_scalar(v[k]);
    const Mat vx = t.value(x);
    return unary_op(x, std::move(v), [vx](const Mat& g, Mat& gx, Tape&) {
        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += g[k] * sigmoid_scalar(vx[k]);
    });
}

Var softmax_rows(Var x) {
    Tape& t = *x.tape;
    Mat v = t.value(x);
    for (int i = 0; i < v.rows(); ++i) {
        double m = v(i, 0);
        for (int j = 1; j < v.cols(); ++j) m = std::max(m, v(i, j));
        double z = 0.0;
        for (int j = 0; j < v.cols(); ++j) {
            v(i, j) = std::exp(v(i, j) - m);
            z += v(i, j);
        }
        for (int j = 0; j < v.cols(); ++j) v(i, j) /= z;
    }
    const Mat p = v;
    return unary_op(x, std::move(v), [p](const Mat& g, Mat& gx, Tape&) {
        for (int i = 0; i < g.rows(); ++i) {
            double gp = 0.0;
            for (int j = 0; j < g.cols(); ++j) gp += g(i, j) * p(i, j);
            for (int j = 0; j < g.cols(); ++j) gx(i, j) += (g(i, j) - gp) * p(i, j);
        }
    });
}

Var clip_max1(Var x) {
    Tape& t = *x.tape;
    Mat v = t.value(x);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = 1.0 - std::max(1.0 - v[k], 0.0);
    const Mat vx = t.value(x);
    return unary_op(x, std::move(v), [vx](const Mat& g, Mat& gx, Tape&) {
        for (std::size_t k = 0; k < gx.size(); ++k)
            if (vx[k] < 1.0) gx[k] += g[k];  // relu subgradient 0 at the kink
    });
}

// ---- reductions and scalar plumbing ----

Var row_sum(Var x) {
    Tape& t = *x.tape;
    return unary_op(x, row_sums(t.value(x)), [](const Mat& g, Mat& gx, Tape&) {
        for (int i = 0; i < gx.rows(); ++i)
            for (int j = 0; j < gx.cols(); ++j) gx(i, j) += g(i, 0);
    });
}

Var full_sum(Var x) {
    Tape& t = *x.tape;
    return unary_op(x, Mat::scalar(pdfold::sum(t.value(x))),
                    [](const Mat& g, Mat& gx, Tape&) {
                        const double gv = g(0, 0);
                        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += gv;
                    });
}

Var inner_product(Var a, Var b) {
    check_same_tape(a, b, "inner_product");
    Tape& t = *a.tape;
    const Mat va = t.value(a), vb = t.value(b);
    return binary_op(a, b, Mat::scalar(dot(va, vb)),
                     [va, vb](const Mat& g, Mat& ga, Mat& gb, Tape&) {
                         const double gv = g(0, 0);
                         for (std::size_t k = 0; k < ga.size(); ++k) {
                             ga[k] += gv * vb[k];
                             gb[k] += gv * va[k];
                         }
                     });
}

Var scale_by(Var scalar, Var x) {
    check_same_tape(scalar, x, "scale_by");
    Tape& t = *x.tape;
    if (!t.value(scalar).is_scalar()) throw std::invalid_argument("scale_by: first operand must be 1x1");
    const double s = t.value(scalar).scalar_value();
    const Mat vx = t.value(x);
    return binary_op(scalar, x, scaled(vx, s),
                     [s, vx](const Mat& g, Mat& gs, Mat& gx, Tape&) {
                         double acc_s = 0.0;
                         for (std::size_t k = 0; k < g.size(); ++k) {
                             acc_s += g[k] * vx[k];
                             gx[k] += s * g[k];
                         }
                         gs(0, 0) += acc_s;
                     });
}

Var sub_scalar(Var x, Var scalar) {
    check_same_tape(x, scalar, "sub_scalar");
    Tape& t = *x.tape;
    if (!t.value(scalar).is_scalar()) throw std::invalid_argument("sub_scalar: second operand must be 1x1");
    const double s = t.value(scalar).scalar_value();
    return binary_op(x, scalar, shifted(t.value(x), -s),
                     [](const Mat& g, Mat& gx, Mat& gs, Tape&) {
                         double acc_s = 0.0;
                         for (std::size_t k = 0; k < g.size(); ++k) {
                             gx[k] += g[k];
                             acc_s += g[k];
                         }
                         gs(0, 0) -= acc_s;
                     });
}

Var pow_int(Var scalar, int n) {
    Tape& t = *scalar.tape;
    if (!t.value(scalar).is_scalar()) throw std::invalid_argument("pow_int: operand must be 1x1");
    if (n < 0) throw std::invalid_argument("pow_int: negative exponent");
    const double s = t.value(scalar).scalar_value();
    const double v = std::pow(s, n);
    return unary_op(scalar, Mat::scalar(v), [s, n](const Mat& g, Mat& gx, Tape&) {
        if (n > 0) gx(0, 0) += g(0, 0) * n * std::pow(s, n - 1);
    });
}

double check_gradient(const std::function<Var(Tape&, Var)>& f, const Mat& x, double eps) {
    Tape tape;
    Var vx = tape.leaf(x);
    Var root = f(tape, vx);
    tape.backward(root);
    const Mat g = tape.grad(vx);

    auto eval = [&](const Mat& pt) {
        Tape t2;
        Var v = t2.leaf(pt);
        return t2.value(f(t2, v)).scalar_value();
    };

    double worst = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        Mat hi = x, lo = x;
        hi[k] += eps;
        lo[k] -= eps;
        const double fd = (eval(hi) - eval(lo)) / (2.0 * eps);
        const double rel = std::fabs(g[k] - fd) / std::max(1.0, std::fabs(fd));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace pdfold::ad
