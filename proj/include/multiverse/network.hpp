#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "multiverse/dataset.hpp"
#include "multiverse/errors.hpp"
#include "multiverse/loss.hpp"
#include "multiverse/matrix.hpp"
#include "multiverse/rng.hpp"
#include "multiverse/scatter.hpp"

namespace multiverse {

/// Two-layer representation network: ReLU after the hidden layer, identity
/// on the output, which becomes the d-dimensional code all heads share.
struct ReprNet {
    Matrix w1;  // h x p
    Vector b1;  // h
    Matrix w2;  // d x h
    Vector b2;  // d

    std::size_t input_dim() const { return w1.cols(); }
    std::size_t hidden_dim() const { return w1.rows(); }
    std::size_t repr_dim() const { return w2.rows(); }
};

/// D = W2 relu(W1 X + b1 1^T) + b2 1^T
inline Matrix forward_repr(const ReprNet& net, const Matrix& inputs) {
    if (inputs.rows() != net.input_dim())
        throw std::invalid_argument("forward_repr: input dimension mismatch");
    const std::size_t h = net.hidden_dim();
    const std::size_t d = net.repr_dim();
    const std::size_t n = inputs.cols();

    Matrix hidden = matmul(net.w1, inputs);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t i = 0; i < n; ++i) hidden(r, i) = std::max(hidden(r, i) + net.b1[r], 0.0);

    Matrix repr = matmul(net.w2, hidden);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t i = 0; i < n; ++i) repr(r, i) += net.b2[r];
    return repr;
}

struct TrainConfig {
    std::size_t heads = 1;
    OrthoKind ortho = OrthoKind::Plain;
    double lambda = 0.005;
    double weight_decay = 0.0005;
    std::size_t batch_size = 200;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    std::size_t hidden_dim = 64;
    std::size_t repr_dim = 16;
};

inline void validate_train_config(const TrainConfig& cfg) {
    if (cfg.heads < 1) throw ConfigError("train config: need at least one head");
    if (cfg.batch_size < 2) throw ConfigError("train config: batch_size must be >= 2");
    // A zero rate is allowed: it pins "training changes nothing" tests.
    if (!(cfg.learning_rate >= 0.0))
        throw ConfigError("train config: learning_rate must be >= 0");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
        throw ConfigError("train config: momentum must be in [0, 1)");
    if (cfg.lambda < 0.0 || cfg.weight_decay < 0.0)
        throw ConfigError("train config: penalties must be >= 0");
    if (cfg.hidden_dim < 1 || cfg.repr_dim < 1)
        throw ConfigError("train config: layer dimensions must be >= 1");
}

/// Per-epoch series. For single-head runs the cross-head diagnostics are
/// recorded as zero.
struct TrainReport {
    std::vector<double> objective;
    std::vector<double> val_error;
    std::vector<double> ortho_violation;
    std::vector<double> prob_agreement;
};

struct TrainResult {
    ReprNet net;
    MultiverseHeads heads;
    TrainReport report;
};

/// He-style initialization: weights from N(0, 2 / fan_in), biases zero.
inline ReprNet init_net(std::size_t input_dim, std::size_t hidden_dim, std::size_t repr_dim,
                        Rng& rng) {
    ReprNet net;
    net.w1 = Matrix(hidden_dim, input_dim);
    const double s1 = std::sqrt(2.0 / static_cast<double>(input_dim));
    for (double& x : net.w1.storage()) x = s1 * rng.gaussian();
    net.b1.assign(hidden_dim, 0.0);
    net.w2 = Matrix(repr_dim, hidden_dim);
    const double s2 = std::sqrt(2.0 / static_cast<double>(hidden_dim));
    for (double& x : net.w2.storage()) x = s2 * rng.gaussian();
    net.b2.assign(repr_dim, 0.0);
    return net;
}

/// Each head gets its own random initialization so orthogonal solutions are
/// reachable from the start.
inline MultiverseHeads init_heads(std::size_t head_count, std::size_t repr_dim,
                                  std::size_t class_count, Rng& rng) {
    MultiverseHeads heads;
    const double s = std::sqrt(2.0 / static_cast<double>(repr_dim));
    for (std::size_t r = 0; r < head_count; ++r) {
        Matrix f(repr_dim, class_count);
        for (double& x : f.storage()) x = s * rng.gaussian();
        heads.weights.push_back(std::move(f));
        heads.biases.emplace_back(class_count, 0.0);
    }
    return heads;
}

/// Within-class scatter of a batch around the batch's own class means.
/// Only classes present in the batch contribute; a single-class batch is
/// fine (the scatter is then the batch covariance around one mean).
inline Matrix batch_within_scatter(const Matrix& repr, const std::vector<int>& labels) {
    std::map<int, int> remap;
    for (int y : labels) remap.emplace(y, 0);
    int next = 0;
    for (auto& [orig, dense] : remap) dense = next++;
    std::vector<int> dense_labels(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) dense_labels[i] = remap.at(labels[i]);
    return compute_scatter(repr, dense_labels, next).within;
}

struct NetGradients {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
    std::vector<Matrix> head_weights;
    std::vector<Vector> head_biases;
    double objective = 0.0;
};

/// Exact gradient of the multi-head objective composed with the
/// representation network. ReLU takes subgradient 0 at 0; in SwOrtho mode
/// the penalty's scatter comes from the current batch's representations and
/// is treated as a constant.
inline NetGradients backward(const ReprNet& net, const MultiverseHeads& heads,
                             const Matrix& inputs, const std::vector<int>& labels,
                             OrthoKind kind, const PenaltyConfig& cfg) {
    if (inputs.cols() == 0) throw std::invalid_argument("backward: empty batch");
    const std::size_t h = net.hidden_dim();
    const std::size_t n = inputs.cols();

    // Forward, keeping the pre-activation mask.
    Matrix pre = matmul(net.w1, inputs);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t i = 0; i < n; ++i) pre(r, i) += net.b1[r];
    Matrix hidden = pre;
    for (double& x : hidden.storage()) x = std::max(x, 0.0);
    Matrix repr = matmul(net.w2, hidden);
    for (std::size_t r = 0; r < net.repr_dim(); ++r)
        for (std::size_t i = 0; i < n; ++i) repr(r, i) += net.b2[r];

    OrthoMode mode = kind == OrthoKind::SwOrtho
                         ? OrthoMode::sw(batch_within_scatter(repr, labels))
                         : OrthoMode::plain();
    ObjectiveResult obj = multiverse_objective(heads, repr, labels, mode, cfg);

    NetGradients grads;
    grads.objective = obj.value;
    grads.head_weights = std::move(obj.weight_grads);
    grads.head_biases = std::move(obj.bias_grads);

    // Backprop through the two layers.
    grads.w2 = matmul(obj.repr_grad, transpose(hidden));
    grads.b2.assign(net.repr_dim(), 0.0);
    for (std::size_t r = 0; r < net.repr_dim(); ++r)
        for (std::size_t i = 0; i < n; ++i) grads.b2[r] += obj.repr_grad(r, i);

    Matrix hidden_grad = matmul(transpose(net.w2), obj.repr_grad);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t i = 0; i < n; ++i)
            if (pre(r, i) <= 0.0) hidden_grad(r, i) = 0.0;

    grads.w1 = matmul(hidden_grad, transpose(inputs));
    grads.b1.assign(h, 0.0);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t i = 0; i < n; ++i) grads.b1[r] += hidden_grad(r, i);
    return grads;
}

/// Classification error of the head-averaged probabilities.
inline double classification_error(const ReprNet& net, const MultiverseHeads& heads,
                                   const LabeledDataset& ds) {
    const Matrix repr = forward_repr(net, ds.features);
    const std::size_t m = heads.head_count();
    const std::size_t c = heads.class_count();
    Matrix mean_probs(c, ds.size());
    for (std::size_t r = 0; r < m; ++r)
        mean_probs += softmax_batch(heads.weights[r], heads.biases[r], repr);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (mean_probs(j, i) > mean_probs(arg, i)) arg = j;
        if (arg != static_cast<std::size_t>(ds.labels[i])) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

namespace detail {

template <typename Store>
inline void momentum_step(Store& param, Store& velocity, const Store& grad, double lr,
                          double momentum) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * grad[i];
        param[i] += velocity[i];
    }
}

/// Gradient of the batch-normalized objective
///   (1/B) sum_r sum_{i in B} ce + lambda * penalty + decay * ||F||^2.
/// The cross-entropy term is averaged so the step size and the penalty
/// weights keep their meaning at any batch size; computed by scaling the
/// penalties up by B inside the summed objective and the result back down.
inline NetGradients backward_mean(const ReprNet& net, const MultiverseHeads& heads,
                                  const Matrix& inputs, const std::vector<int>& labels,
                                  OrthoKind kind, const PenaltyConfig& cfg) {
    const double b = static_cast<double>(inputs.cols());
    const PenaltyConfig scaled{cfg.lambda * b, cfg.weight_decay * b};
    NetGradients grads = backward(net, heads, inputs, labels, kind, scaled);
    const double inv = 1.0 / b;
    grads.objective *= inv;
    grads.w1 *= inv;
    grads.w2 *= inv;
    for (double& x : grads.b1) x *= inv;
    for (double& x : grads.b2) x *= inv;
    for (Matrix& g : grads.head_weights) g *= inv;
    for (Vector& g : grads.head_biases)
        for (double& x : g) x *= inv;
    return grads;
}

}  // namespace detail

/// Mini-batch SGD with momentum from explicit starting parameters. The
/// shuffled order, every batch, and therefore the final parameters are pinned
/// by cfg.seed. The last short batch is kept.
inline TrainResult train(const LabeledDataset& train_ds, const LabeledDataset& val_ds,
                         const TrainConfig& cfg, ReprNet net, MultiverseHeads heads) {
    validate_train_config(cfg);
    validate_dataset(train_ds);
    validate_dataset(val_ds);
    if (train_ds.class_count != static_cast<int>(heads.class_count()))
        throw std::invalid_argument("train: head class count differs from dataset");
    if (val_ds.class_count != train_ds.class_count)
        throw std::invalid_argument("train: validation class count differs from train");
    if (net.repr_dim() != heads.dim())
        throw std::invalid_argument("train: representation dimension differs from heads");

    const PenaltyConfig penalty{cfg.lambda, cfg.weight_decay};
    Rng rng(derive_seed(cfg.seed, 1));

    ReprNet vel_net;
    vel_net.w1 = Matrix(net.w1.rows(), net.w1.cols());
    vel_net.b1.assign(net.b1.size(), 0.0);
    vel_net.w2 = Matrix(net.w2.rows(), net.w2.cols());
    vel_net.b2.assign(net.b2.size(), 0.0);
    std::vector<Matrix> vel_w(heads.head_count(),
                              Matrix(heads.dim(), heads.class_count()));
    std::vector<Vector> vel_b(heads.head_count(), Vector(heads.class_count(), 0.0));

    std::vector<std::size_t> order(train_ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    result.report.objective.reserve(cfg.epochs);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Step decay, 1/10 at 60% and again at 80% of the epoch budget. The
        // |.| penalty keeps a constant-magnitude subgradient, so a constant
        // step leaves the couplings oscillating at the step scale instead of
        // settling onto the orthogonal set.
        double lr = cfg.learning_rate;
        if (10 * epoch >= 8 * cfg.epochs)
            lr *= 0.01;
        else if (10 * epoch >= 6 * cfg.epochs)
            lr *= 0.1;
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            Matrix batch(train_ds.dim(), stop - start);
            std::vector<int> batch_labels(stop - start);
            for (std::size_t k = start; k < stop; ++k) {
                batch.set_col(k - start, train_ds.features.col(order[k]));
                batch_labels[k - start] = train_ds.labels[order[k]];
            }
            const NetGradients grads =
                detail::backward_mean(net, heads, batch, batch_labels, cfg.ortho, penalty);

            detail::momentum_step(net.w1.storage(), vel_net.w1.storage(), grads.w1.storage(),
                                  lr, cfg.momentum);
            detail::momentum_step(net.b1, vel_net.b1, grads.b1, lr, cfg.momentum);
            detail::momentum_step(net.w2.storage(), vel_net.w2.storage(), grads.w2.storage(),
                                  lr, cfg.momentum);
            detail::momentum_step(net.b2, vel_net.b2, grads.b2, lr, cfg.momentum);
            for (std::size_t r = 0; r < heads.head_count(); ++r) {
                detail::momentum_step(heads.weights[r].storage(), vel_w[r].storage(),
                                      grads.head_weights[r].storage(), lr, cfg.momentum);
                detail::momentum_step(heads.biases[r], vel_b[r], grads.head_biases[r],
                                      lr, cfg.momentum);
            }
        }

        // Epoch bookkeeping on the full train set and the validation set.
        // The reported objective uses the same per-sample normalization of
        // the data term the optimizer sees.
        const Matrix train_repr = forward_repr(net, train_ds.features);
        OrthoMode mode = cfg.ortho == OrthoKind::SwOrtho
                             ? OrthoMode::sw(batch_within_scatter(train_repr, train_ds.labels))
                             : OrthoMode::plain();
        const double n_train = static_cast<double>(train_ds.size());
        const PenaltyConfig scaled{cfg.lambda * n_train, cfg.weight_decay * n_train};
        const ObjectiveResult obj =
            multiverse_objective(heads, train_repr, train_ds.labels, mode, scaled);
        const double objective_value = obj.value / n_train;
        if (!std::isfinite(objective_value))
            throw DivergenceError("train: objective became non-finite at epoch " +
                                      std::to_string(epoch + 1),
                                  epoch + 1);
        result.report.objective.push_back(objective_value);
        result.report.val_error.push_back(classification_error(net, heads, val_ds));
        if (heads.head_count() >= 2) {
            result.report.ortho_violation.push_back(ortho_violation(heads, mode));
            // Head agreement is a statement about training samples: the heads
            // produce matching probabilities where the loss constrained them.
            result.report.prob_agreement.push_back(prob_agreement(heads, train_repr));
        } else {
            result.report.ortho_violation.push_back(0.0);
            result.report.prob_agreement.push_back(0.0);
        }
    }

    result.net = std::move(net);
    result.heads = std::move(heads);
    return result;
}

/// Seeded end-to-end training: parameters are initialized from cfg.seed and
/// optimized on the train split.
inline TrainResult train(const LabeledDataset& train_ds, const LabeledDataset& val_ds,
                         const TrainConfig& cfg) {
    validate_train_config(cfg);
    Rng init_rng(derive_seed(cfg.seed, 0));
    ReprNet net = init_net(train_ds.dim(), cfg.hidden_dim, cfg.repr_dim, init_rng);
    MultiverseHeads heads =
        init_heads(cfg.heads, cfg.repr_dim,
                   static_cast<std::size_t>(train_ds.class_count), init_rng);
    return train(train_ds, val_ds, cfg, std::move(net), std::move(heads));
}

}  // namespace multiverse
