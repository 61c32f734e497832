#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "trec/check.hpp"

namespace trec::ad {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Reverse-mode tape over variable-sized feature matrices. Coordinates of the
// sparse tensors are non-differentiable; gradients flow through features and
// weights only. Training runs in f32; gradient checks instantiate the same
// templates in f64.
template <class S>
struct Node {
    Mat<S> value;
    Mat<S> grad;  // allocated lazily, kept zero-sized until touched
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<S>>> parents;
    std::function<void(Node<S>&)> backprop;  // consumes this->grad

    Mat<S>& grad_ref() {
        if (grad.size() == 0) grad = Mat<S>::Zero(value.rows(), value.cols());
        return grad;
    }
};

template <class S>
using NodePtr = std::shared_ptr<Node<S>>;

// Graph recording is disabled inside inference scopes.
inline thread_local bool g_grad_enabled = true;

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
    ~NoGradGuard() { g_grad_enabled = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class S>
NodePtr<S> make_leaf(Mat<S> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

template <class S>
NodePtr<S> make_param(Mat<S> value) {
    return make_leaf<S>(std::move(value), true);
}

template <class S>
bool any_requires_grad(const std::vector<NodePtr<S>>& parents) {
    for (const auto& p : parents) {
        if (p && p->requires_grad) return true;
    }
    return false;
}

// Builds an op node; the closure is dropped when no parent needs gradients
// or recording is disabled, so inference passes carry no graph.
template <class S>
NodePtr<S> make_op(Mat<S> value, std::vector<NodePtr<S>> parents,
                   std::function<void(Node<S>&)> backprop) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(value);
    if (g_grad_enabled && any_requires_grad(parents)) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

// Reverse-topological traversal from a scalar root. Gradients accumulate
// into each node's grad field; parameter grads persist until zeroed by the
// optimizer.
template <class S>
void backward(const NodePtr<S>& root) {
    TREC_CHECK(root != nullptr, "backward needs a node");
    TREC_CHECK(root->value.rows() == 1 && root->value.cols() == 1,
               "backward expects a scalar (1x1) root");
    TREC_CHECK(root->requires_grad, "root does not require gradients (missing forward record)");

    std::vector<Node<S>*> topo;
    std::unordered_set<Node<S>*> visited;
    // iterative DFS; second visit emits the node after its parents
    std::vector<std::pair<Node<S>*, bool>> stack;
    stack.emplace_back(root.get(), false);
    while (!stack.empty()) {
        auto [n, expanded] = stack.back();
        stack.pop_back();
        if (expanded) {
            topo.push_back(n);
            continue;
        }
        if (visited.count(n)) continue;
        visited.insert(n);
        stack.emplace_back(n, true);
        for (const auto& p : n->parents) {
            if (p && p->requires_grad && !visited.count(p.get())) {
                stack.emplace_back(p.get(), false);
            }
        }
    }

    root->grad_ref()(0, 0) += S(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node<S>* n = *it;
        if (n->backprop && n->grad.size() != 0) n->backprop(*n);
    }
}

// ---- elementwise and structural ops ----

template <class S>
NodePtr<S> add(const NodePtr<S>& a, const NodePtr<S>& b) {
    TREC_CHECK(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(),
               "add expects equal shapes");
    return make_op<S>(
        a->value + b->value, {a, b}, [a, b](Node<S>& n) {
            if (a->requires_grad) a->grad_ref() += n.grad;
            if (b->requires_grad) b->grad_ref() += n.grad;
        });
}

template <class S>
NodePtr<S> scale(const NodePtr<S>& a, S factor) {
    return make_op<S>(a->value * factor, {a}, [a, factor](Node<S>& n) {
        if (a->requires_grad) a->grad_ref() += n.grad * factor;
    });
}

template <class S>
NodePtr<S> elu(const NodePtr<S>& x) {
    Mat<S> v = x->value.unaryExpr([](S e) { return e > S(0) ? e : std::expm1(e); });
    return make_op<S>(std::move(v), {x}, [x](Node<S>& n) {
        if (!x->requires_grad) return;
        // d elu / dx = 1 for x > 0, exp(x) = value + 1 otherwise
        x->grad_ref().array() +=
            n.grad.array() * x->value.array().binaryExpr(n.value.array(), [](S xv, S v) {
                return xv > S(0) ? S(1) : v + S(1);
            });
    });
}

template <class S>
NodePtr<S> sigmoid(const NodePtr<S>& x) {
    Mat<S> v = x->value.unaryExpr([](S e) {
        if (e >= S(0)) return S(1) / (S(1) + std::exp(-e));
        const S t = std::exp(e);
        return t / (S(1) + t);
    });
    return make_op<S>(std::move(v), {x}, [x](Node<S>& n) {
        if (!x->requires_grad) return;
        x->grad_ref().array() += n.grad.array() * n.value.array() * (S(1) - n.value.array());
    });
}

// Column-wise concatenation [a | b] of two matrices with equal row counts.
template <class S>
NodePtr<S> concat_cols(const NodePtr<S>& a, const NodePtr<S>& b) {
    TREC_CHECK(a->value.rows() == b->value.rows(), "concat_cols expects equal row counts");
    Mat<S> v(a->value.rows(), a->value.cols() + b->value.cols());
    v.leftCols(a->value.cols()) = a->value;
    v.rightCols(b->value.cols()) = b->value;
    const Eigen::Index ca = a->value.cols();
    return make_op<S>(std::move(v), {a, b}, [a, b, ca](Node<S>& n) {
        if (a->requires_grad) a->grad_ref() += n.grad.leftCols(ca);
        if (b->requires_grad) b->grad_ref() += n.grad.rightCols(n.grad.cols() - ca);
    });
}

// out.row(r) = x.row(index[r]) when index[r] >= 0, zeros otherwise. Used for
// the skip merges, where encoder rows are gathered onto decoder coordinates.
template <class S>
NodePtr<S> gather_rows_or_zero(const NodePtr<S>& x, std::vector<int32_t> index) {
    Mat<S> v = Mat<S>::Zero(static_cast<Eigen::Index>(index.size()), x->value.cols());
    for (size_t r = 0; r < index.size(); ++r) {
        if (index[r] >= 0) v.row(static_cast<Eigen::Index>(r)) = x->value.row(index[r]);
    }
    return make_op<S>(std::move(v), {x},
                      [x, index = std::move(index)](Node<S>& n) {
                          if (!x->requires_grad) return;
                          Mat<S>& gx = x->grad_ref();
                          for (size_t r = 0; r < index.size(); ++r) {
                              if (index[r] >= 0) {
                                  gx.row(index[r]) += n.grad.row(static_cast<Eigen::Index>(r));
                              }
                          }
                      });
}

// Keeps the listed rows; gradients flow back only through kept rows.
template <class S>
NodePtr<S> take_rows(const NodePtr<S>& x, std::vector<int32_t> rows) {
    Mat<S> v(static_cast<Eigen::Index>(rows.size()), x->value.cols());
    for (size_t r = 0; r < rows.size(); ++r) {
        v.row(static_cast<Eigen::Index>(r)) = x->value.row(rows[r]);
    }
    return make_op<S>(std::move(v), {x},
                      [x, rows = std::move(rows)](Node<S>& n) {
                          if (!x->requires_grad) return;
                          Mat<S>& gx = x->grad_ref();
                          for (size_t r = 0; r < rows.size(); ++r) {
                              gx.row(rows[r]) += n.grad.row(static_cast<Eigen::Index>(r));
                          }
                      });
}

// Adds a 1 x C bias row to every row of x.
template <class S>
NodePtr<S> add_rowwise(const NodePtr<S>& x, const NodePtr<S>& bias) {
    TREC_CHECK(bias->value.rows() == 1 && bias->value.cols() == x->value.cols(),
               "bias must be 1 x C");
    Mat<S> v = x->value;
    v.rowwise() += bias->value.row(0);
    return make_op<S>(std::move(v), {x, bias}, [x, bias](Node<S>& n) {
        if (x->requires_grad) x->grad_ref() += n.grad;
        if (bias->requires_grad) bias->grad_ref().row(0) += n.grad.colwise().sum();
    });
}

// Sum of scalar nodes.
template <class S>
NodePtr<S> add_scalars(const std::vector<NodePtr<S>>& terms) {
    TREC_CHECK(!terms.empty(), "add_scalars needs at least one term");
    S total = S(0);
    for (const auto& t : terms) {
        TREC_CHECK(t->value.size() == 1, "add_scalars expects scalar terms");
        total += t->value(0, 0);
    }
    Mat<S> v(1, 1);
    v(0, 0) = total;
    std::vector<NodePtr<S>> parents(terms.begin(), terms.end());
    return make_op<S>(std::move(v), std::move(parents), [terms](Node<S>& n) {
        for (const auto& t : terms) {
            if (t->requires_grad) t->grad_ref()(0, 0) += n.grad(0, 0);
        }
    });
}

}  // namespace trec::ad
