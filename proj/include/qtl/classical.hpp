// Classical building blocks: dense layers, a residual block, ReLU,
// cross-entropy, SGD/Adam with learning-rate schedules.
//
// Layers carry a `frozen` flag. Frozen layers still produce gradients for
// everything upstream and downstream of them; the optimizer just skips
// their parameter updates.

#pragma once

#include "qtl/matrix.hpp"
#include "qtl/rng.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qtl::classical {

// ---------------------------------------------------------------------------
// Layers

struct DenseLayer {
    Matrix weights; // [out][in]
    std::vector<double> bias;
    bool frozen = false;

    int in_width() const { return weights.cols; }
    int out_width() const { return weights.rows; }
};

/// Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero bias.
inline DenseLayer make_dense(int in_width, int out_width, Rng& rng) {
    if (in_width < 1 || out_width < 1)
        throw std::invalid_argument("make_dense: widths must be positive");
    DenseLayer layer;
    layer.weights = Matrix(out_width, in_width);
    layer.bias.assign(out_width, 0.0);
    const double bound = std::sqrt(6.0 / (in_width + out_width));
    for (double& w : layer.weights.data) w = rng.uniform(-bound, bound);
    return layer;
}

inline std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x) {
    if (static_cast<int>(x.size()) != layer.in_width())
        throw std::invalid_argument("dense_forward: input width " + std::to_string(x.size()) +
                                    " != layer width " + std::to_string(layer.in_width()));
    std::vector<double> y = matvec(layer.weights, x);
    for (int i = 0; i < layer.out_width(); ++i) y[i] += layer.bias[i];
    return y;
}

struct DenseGrads {
    Matrix weights;
    std::vector<double> bias;
};

inline DenseGrads zero_grads(const DenseLayer& layer) {
    return {Matrix(layer.out_width(), layer.in_width()),
            std::vector<double>(layer.out_width(), 0.0)};
}

/// Accumulates dW += dy x^T, db += dy and returns dx = W^T dy.
inline std::vector<double> dense_backward(const DenseLayer& layer, std::span<const double> x,
                                          std::span<const double> dy, DenseGrads& grads) {
    if (static_cast<int>(dy.size()) != layer.out_width())
        throw std::invalid_argument("dense_backward: gradient width mismatch");
    for (int r = 0; r < layer.out_width(); ++r) {
        for (int c = 0; c < layer.in_width(); ++c) grads.weights(r, c) += dy[r] * x[c];
        grads.bias[r] += dy[r];
    }
    return matvec_transposed(layer.weights, dy);
}

/// max(0, x); the subgradient at 0 is taken as 0.
inline std::vector<double> relu(std::span<const double> x) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

inline std::vector<double> relu_backward(std::span<const double> x, std::span<const double> dy) {
    std::vector<double> dx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
    return dx;
}

// Residual mapping y = F(x) + x with F = dense o ReLU o dense; both inner
// layers share the block width so the identity shortcut applies.
struct ResidualBlock {
    DenseLayer first;
    DenseLayer second;

    int width() const { return first.in_width(); }
    bool frozen() const { return first.frozen && second.frozen; }
    void set_frozen(bool value) { first.frozen = second.frozen = value; }
};

inline ResidualBlock make_residual(int width, Rng& rng) {
    ResidualBlock block;
    block.first = make_dense(width, width, rng);
    block.second = make_dense(width, width, rng);
    return block;
}

struct ResidualCache {
    std::vector<double> x;      // block input
    std::vector<double> hidden; // first dense output, pre-ReLU
};

inline std::vector<double> residual_forward(const ResidualBlock& block, std::span<const double> x,
                                            ResidualCache* cache = nullptr) {
    if (static_cast<int>(x.size()) != block.width())
        throw std::invalid_argument("residual_forward: input width mismatch");
    std::vector<double> hidden = dense_forward(block.first, x);
    std::vector<double> y = dense_forward(block.second, relu(hidden));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
    if (cache) {
        cache->x.assign(x.begin(), x.end());
        cache->hidden = std::move(hidden);
    }
    return y;
}

struct ResidualGrads {
    DenseGrads first;
    DenseGrads second;
};

inline ResidualGrads zero_grads(const ResidualBlock& block) {
    return {zero_grads(block.first), zero_grads(block.second)};
}

inline std::vector<double> residual_backward(const ResidualBlock& block,
                                             const ResidualCache& cache,
                                             std::span<const double> dy, ResidualGrads& grads) {
    const std::vector<double> activated = relu(cache.hidden);
    const std::vector<double> d_act = dense_backward(block.second, activated, dy, grads.second);
    const std::vector<double> d_hidden = relu_backward(cache.hidden, d_act);
    std::vector<double> dx = dense_backward(block.first, cache.x, d_hidden, grads.first);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i]; // identity shortcut
    return dx;
}

// ---------------------------------------------------------------------------
// Loss

inline std::vector<double> softmax(std::span<const double> logits) {
    double max_logit = logits[0];
    for (double v : logits) max_logit = std::max(max_logit, v);
    std::vector<double> probs(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        total += probs[i];
    }
    for (double& p : probs) p /= total;
    return probs;
}

struct LossResult {
    double loss = 0.0;
    std::vector<double> dlogits;
};

/// Softmax cross-entropy: loss = -log p_label, gradient p - onehot(label).
inline LossResult cross_entropy(std::span<const double> logits, int label) {
    if (logits.size() < 2) throw std::invalid_argument("cross_entropy: need at least 2 classes");
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                    " out of range for " + std::to_string(logits.size()) +
                                    " classes");
    LossResult result;
    result.dlogits = softmax(logits);
    // recompute -log p_t from the stabilized pieces to avoid log(0) at saturation
    double max_logit = logits[0];
    for (double v : logits) max_logit = std::max(max_logit, v);
    double total = 0.0;
    for (double v : logits) total += std::exp(v - max_logit);
    result.loss = std::log(total) - (logits[label] - max_logit);
    result.dlogits[label] -= 1.0;
    return result;
}

// ---------------------------------------------------------------------------
// Optimizers and schedules

enum class OptimizerKind { SGD, Adam };
enum class ScheduleKind { StepDecay, ConstThenLinear };

struct Schedule {
    ScheduleKind kind = ScheduleKind::StepDecay;
    // StepDecay: lr * factor^floor(epoch / every_n_epochs)
    double factor = 0.1;
    int every_n_epochs = 10;
    // ConstThenLinear: lr for epoch < const_epochs, then linear to zero
    // across the next decay_epochs, zero afterwards.
    int const_epochs = 25;
    int decay_epochs = 25;
};

inline double schedule_lr(const Schedule& schedule, double base_lr, int epoch) {
    if (epoch < 0) throw std::invalid_argument("schedule_lr: epoch must be >= 0");
    switch (schedule.kind) {
    case ScheduleKind::StepDecay:
        return base_lr * std::pow(schedule.factor, epoch / schedule.every_n_epochs);
    case ScheduleKind::ConstThenLinear: {
        if (epoch < schedule.const_epochs) return base_lr;
        const int into_decay = epoch - schedule.const_epochs;
        if (into_decay >= schedule.decay_epochs) return 0.0;
        return base_lr * static_cast<double>(schedule.decay_epochs - into_decay) /
               schedule.decay_epochs;
    }
    }
    return base_lr;
}

/// theta <- theta - lr * g
inline void sgd_step(std::vector<double>& params, std::span<const double> grads, double lr) {
    if (params.size() != grads.size())
        throw std::invalid_argument("sgd_step: parameter/gradient shape mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;
};

/// Bias-corrected Adam update for one parameter array at global step t (1-based).
inline void adam_step(std::vector<double>& params, std::span<const double> grads,
                      AdamMoments& moments, long t, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: parameter/gradient shape mismatch");
    if (moments.m.size() != params.size()) {
        moments.m.assign(params.size(), 0.0);
        moments.v.assign(params.size(), 0.0);
    }
    const double correction1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double correction2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        moments.m[i] = beta1 * moments.m[i] + (1.0 - beta1) * grads[i];
        moments.v[i] = beta2 * moments.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double m_hat = moments.m[i] / correction1;
        const double v_hat = moments.v[i] / correction2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

// One optimizer instance drives every trainable array of a model through a
// training run. Slots keep Adam moments aligned with their arrays.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 4e-4;
    Schedule schedule;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    int epoch = 0;
    std::vector<AdamMoments> slots;

    double current_lr() const { return schedule_lr(schedule, learning_rate, epoch); }
};

struct ParamBinding {
    std::vector<double>* values = nullptr;
    const std::vector<double>* grads = nullptr;
    bool frozen = false;
};

/// One update across all bound arrays. Frozen arrays keep their slot but are
/// skipped, so freezing does not shift the moment bookkeeping of the rest.
inline void optimizer_step(OptimizerState& state, std::span<const ParamBinding> bindings) {
    if (state.slots.size() < bindings.size()) state.slots.resize(bindings.size());
    ++state.step;
    const double lr = state.current_lr();
    for (std::size_t i = 0; i < bindings.size(); ++i) {
        const ParamBinding& binding = bindings[i];
        if (binding.frozen) continue;
        if (state.kind == OptimizerKind::SGD)
            sgd_step(*binding.values, *binding.grads, lr);
        else
            adam_step(*binding.values, *binding.grads, state.slots[i], state.step, lr,
                      state.beta1, state.beta2, state.eps);
    }
}

} // namespace qtl::classical
