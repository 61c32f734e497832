#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "trec/autograd.hpp"
#include "trec/rng.hpp"

namespace trec::nn {

// ---- batch normalization ----

// Per-channel batch normalization over all active coordinates. Train mode
// normalizes with batch statistics and updates the running estimates; eval
// mode is a deterministic affine map from the running statistics.
template <class S>
struct BatchNorm {
    ad::NodePtr<S> gamma;
    ad::NodePtr<S> beta;
    ad::Mat<S> running_mean;
    ad::Mat<S> running_var;
    S momentum = S(0.1);
    S eps = S(1e-5);
    // >= 0 while recalibrating: running stats accumulate the exact average
    // of the batch statistics instead of the exponential moving average
    int64_t calibration_count = -1;

    explicit BatchNorm(int channels = 0) { reset(channels); }

    void reset(int channels) {
        gamma = ad::make_param<S>(ad::Mat<S>::Ones(1, channels));
        beta = ad::make_param<S>(ad::Mat<S>::Zero(1, channels));
        running_mean = ad::Mat<S>::Zero(1, channels);
        running_var = ad::Mat<S>::Ones(1, channels);
    }

    int channels() const { return static_cast<int>(gamma->value.cols()); }

    ad::NodePtr<S> forward(const ad::NodePtr<S>& x, bool training) {
        TREC_CHECK(x->value.cols() == gamma->value.cols(),
                   "batch_norm channel count mismatch");
        const Eigen::Index n = x->value.rows();
        if (training) {
            TREC_CHECK(n > 0, "batch_norm in train mode needs at least one active coordinate");
            const ad::Mat<S> mu = x->value.colwise().mean();
            ad::Mat<S> centered = x->value;
            centered.rowwise() -= mu.row(0);
            const ad::Mat<S> var = centered.array().square().colwise().mean();
            ad::Mat<S> inv_std =
                (var.array() + eps).sqrt().inverse();
            ad::Mat<S> xhat = centered;
            xhat.array().rowwise() *= inv_std.row(0).array();

            if (calibration_count >= 0) {
                ++calibration_count;
                const S m = S(1) / static_cast<S>(calibration_count);
                running_mean = (S(1) - m) * running_mean + m * mu;
                running_var = (S(1) - m) * running_var + m * var;
            } else {
                running_mean = (S(1) - momentum) * running_mean + momentum * mu;
                running_var = (S(1) - momentum) * running_var + momentum * var;
            }

            ad::Mat<S> y = xhat;
            y.array().rowwise() *= gamma->value.row(0).array();
            y.rowwise() += beta->value.row(0);

            auto g = gamma;
            auto b = beta;
            return ad::make_op<S>(
                std::move(y), {x, gamma, beta},
                [x, g, b, xhat = std::move(xhat), inv_std = std::move(inv_std)](ad::Node<S>& out) {
                    const ad::Mat<S>& grad = out.grad;
                    if (b->requires_grad) b->grad_ref().row(0) += grad.colwise().sum();
                    if (g->requires_grad) {
                        g->grad_ref().row(0) += (grad.array() * xhat.array()).colwise().sum().matrix();
                    }
                    if (!x->requires_grad) return;
                    const S n_rows = static_cast<S>(grad.rows());
                    ad::Mat<S> dxhat = grad;
                    dxhat.array().rowwise() *= g->value.row(0).array();
                    const ad::Mat<S> mean_dxhat = dxhat.colwise().sum() / n_rows;
                    const ad::Mat<S> mean_dxhat_xhat =
                        (dxhat.array() * xhat.array()).colwise().sum().matrix() / n_rows;
                    ad::Mat<S> dx = dxhat;
                    dx.rowwise() -= mean_dxhat.row(0);
                    dx.array() -= xhat.array().rowwise() * mean_dxhat_xhat.row(0).array();
                    dx.array().rowwise() *= inv_std.row(0).array();
                    x->grad_ref() += dx;
                });
        }

        // eval: affine map from running statistics, no state mutation
        ad::Mat<S> inv_std = (running_var.array() + eps).sqrt().inverse();
        ad::Mat<S> y = x->value;
        y.rowwise() -= running_mean.row(0);
        y.array().rowwise() *= (inv_std.row(0).array() * gamma->value.row(0).array());
        y.rowwise() += beta->value.row(0);
        auto g = gamma;
        auto b = beta;
        ad::Mat<S> scale = inv_std;
        return ad::make_op<S>(
            std::move(y), {x, gamma, beta},
            [x, g, b, scale = std::move(scale), rm = running_mean](ad::Node<S>& out) {
                const ad::Mat<S>& grad = out.grad;
                if (b->requires_grad) b->grad_ref().row(0) += grad.colwise().sum();
                if (g->requires_grad) {
                    ad::Mat<S> xhat = x->value;
                    xhat.rowwise() -= rm.row(0);
                    xhat.array().rowwise() *= scale.row(0).array();
                    g->grad_ref().row(0) += (grad.array() * xhat.array()).colwise().sum().matrix();
                }
                if (x->requires_grad) {
                    ad::Mat<S> dx = grad;
                    dx.array().rowwise() *= (scale.row(0).array() * g->value.row(0).array());
                    x->grad_ref() += dx;
                }
            });
    }
};

// ---- losses ----

template <class S>
struct ScalarLoss {
    ad::NodePtr<S> value;
    bool empty = false;  // warning flag: no coordinates contributed
};

// Mean binary cross-entropy over the active coordinates of a likelihood
// tensor; target[i] says whether the coordinate is occupied in the target at
// this layer's resolution. Probabilities are clamped to [1e-7, 1 - 1e-7].
template <class S>
ScalarLoss<S> occupancy_bce(const ad::NodePtr<S>& likelihood, const std::vector<uint8_t>& target) {
    TREC_CHECK(likelihood->value.cols() == 1, "likelihood must have a single channel");
    TREC_CHECK(static_cast<size_t>(likelihood->value.rows()) == target.size(),
               "target size must match likelihood coordinate count");
    const Eigen::Index n = likelihood->value.rows();
    constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    if (n == 0) {
        return {ad::make_op<S>(ad::Mat<S>::Zero(1, 1), {likelihood}, [](ad::Node<S>&) {}), true};
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = std::min(std::max(static_cast<double>(likelihood->value(i, 0)), lo), hi);
        total += target[static_cast<size_t>(i)] ? -std::log(p) : -std::log(1.0 - p);
    }
    ad::Mat<S> v(1, 1);
    v(0, 0) = static_cast<S>(total / static_cast<double>(n));
    auto node = ad::make_op<S>(
        std::move(v), {likelihood}, [likelihood, target, n](ad::Node<S>& out) {
            if (!likelihood->requires_grad) return;
            const S g = out.grad(0, 0) / static_cast<S>(n);
            ad::Mat<S>& gp = likelihood->grad_ref();
            for (Eigen::Index i = 0; i < n; ++i) {
                const S p = likelihood->value(i, 0);
                if (p <= S(lo) || p >= S(hi)) continue;  // clamped region, zero slope
                const S y = target[static_cast<size_t>(i)] ? S(1) : S(0);
                gp(i, 0) += g * (p - y) / (p * (S(1) - p));
            }
        });
    return {std::move(node), false};
}

// Mean Euclidean distance between matched feature rows; the caller gathers
// the coordinate intersection into pred / target with equal row order.
template <class S>
ScalarLoss<S> offset_loss(const ad::NodePtr<S>& pred, const ad::Mat<S>& target) {
    TREC_CHECK(pred->value.rows() == target.rows() && pred->value.cols() == target.cols(),
               "pred/target shape mismatch");
    const Eigen::Index n = pred->value.rows();
    if (n == 0) {
        return {ad::make_op<S>(ad::Mat<S>::Zero(1, 1), {pred}, [](ad::Node<S>&) {}), true};
    }
    ad::Mat<S> diff = pred->value - target;
    Eigen::Array<S, Eigen::Dynamic, 1> norms = diff.rowwise().norm();
    ad::Mat<S> v(1, 1);
    v(0, 0) = norms.sum() / static_cast<S>(n);
    auto node = ad::make_op<S>(
        std::move(v), {pred},
        [pred, diff = std::move(diff), norms = std::move(norms), n](ad::Node<S>& out) {
            if (!pred->requires_grad) return;
            const S g = out.grad(0, 0) / static_cast<S>(n);
            ad::Mat<S>& gp = pred->grad_ref();
            for (Eigen::Index i = 0; i < n; ++i) {
                if (norms(i) > S(0)) gp.row(i) += (g / norms(i)) * diff.row(i);
            }
        });
    return {std::move(node), false};
}

// ---- optimizer ----

// Adam with bias correction; canonical defaults beta1 0.9, beta2 0.999,
// eps 1e-8. Parameters with an untouched gradient are skipped for the step.
template <class S>
class Adam {
public:
    explicit Adam(std::vector<ad::NodePtr<S>> params, S beta1 = S(0.9), S beta2 = S(0.999),
                  S eps = S(1e-8))
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            m_[i] = ad::Mat<S>::Zero(params_[i]->value.rows(), params_[i]->value.cols());
            v_[i] = ad::Mat<S>::Zero(params_[i]->value.rows(), params_[i]->value.cols());
        }
    }

    // Applies one update; returns false (leaving all parameters untouched)
    // when any gradient is non-finite.
    bool step(S lr) {
        for (const auto& p : params_) {
            if (p->grad.size() != 0 && !p->grad.allFinite()) return false;
        }
        ++step_count_;
        const S c1 = S(1) - std::pow(beta1_, static_cast<S>(step_count_));
        const S c2 = S(1) - std::pow(beta2_, static_cast<S>(step_count_));
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            if (p->grad.size() == 0) continue;
            m_[i] = beta1_ * m_[i] + (S(1) - beta1_) * p->grad;
            v_[i] = beta2_ * v_[i] + (S(1) - beta2_) * p->grad.cwiseProduct(p->grad);
            p->value.array() -=
                lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
        }
        return true;
    }

    void zero_grad() {
        for (auto& p : params_) p->grad.resize(0, 0);
    }

    const std::vector<ad::NodePtr<S>>& params() const { return params_; }
    int64_t step_count() const { return step_count_; }
    void set_step_count(int64_t s) { step_count_ = s; }
    std::vector<ad::Mat<S>>& first_moments() { return m_; }
    std::vector<ad::Mat<S>>& second_moments() { return v_; }

private:
    std::vector<ad::NodePtr<S>> params_;
    std::vector<ad::Mat<S>> m_, v_;
    S beta1_, beta2_, eps_;
    int64_t step_count_ = 0;
};

// Exponential decay from lr_initial to lr_final over num_epochs epochs.
inline double lr_schedule(int epoch, int num_epochs, double lr_initial = 0.01,
                          double lr_final = 0.0001) {
    TREC_CHECK(epoch >= 0 && epoch < num_epochs, "epoch out of range");
    if (num_epochs == 1) return lr_initial;
    const double gamma =
        std::pow(lr_final / lr_initial, 1.0 / static_cast<double>(num_epochs - 1));
    return lr_initial * std::pow(gamma, static_cast<double>(epoch));
}

// Uniform fan-in initialization for convolution weights.
template <class S>
ad::Mat<S> init_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double limit) {
    ad::Mat<S> w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            w(r, c) = static_cast<S>(rng.uniform(-limit, limit));
        }
    }
    return w;
}

}  // namespace trec::nn
