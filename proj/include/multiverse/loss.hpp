#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "multiverse/eigen.hpp"
#include "multiverse/errors.hpp"
#include "multiverse/matrix.hpp"

namespace multiverse {

/// m classifier heads sharing one representation: weight matrices d x c
/// (column j classifies class j) and bias vectors of length c.
struct MultiverseHeads {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    std::size_t head_count() const { return weights.size(); }
    std::size_t dim() const { return weights.empty() ? 0 : weights.front().rows(); }
    std::size_t class_count() const { return weights.empty() ? 0 : weights.front().cols(); }
};

inline void validate_heads(const MultiverseHeads& heads) {
    if (heads.weights.empty() || heads.weights.size() != heads.biases.size())
        throw std::invalid_argument("heads: need matching weight/bias lists, at least one head");
    for (std::size_t r = 0; r < heads.head_count(); ++r) {
        if (heads.weights[r].rows() != heads.dim() ||
            heads.weights[r].cols() != heads.class_count() ||
            heads.biases[r].size() != heads.class_count())
            throw std::invalid_argument("heads: inconsistent head shapes");
    }
}

/// Which inner product the cross-head penalty uses: the identity, or the
/// within-class scatter of the current batch.
enum class OrthoKind { Plain, SwOrtho };

struct OrthoMode {
    OrthoKind kind = OrthoKind::Plain;
    Matrix within;  // only used for SwOrtho

    static OrthoMode plain() { return {}; }
    static OrthoMode sw(Matrix s_w) { return {OrthoKind::SwOrtho, std::move(s_w)}; }
};

struct PenaltyConfig {
    double lambda = 0.005;
    double weight_decay = 0.0005;  // applied to head weights only
};

/// Stabilized per-column softmax of the head logits over a batch; column i
/// holds the class probabilities of sample i.
inline Matrix softmax_batch(const Matrix& weights, const Vector& biases, const Matrix& batch) {
    if (weights.rows() != batch.rows() || weights.cols() != biases.size())
        throw std::invalid_argument("softmax: dimension mismatch");
    const std::size_t c = weights.cols();
    const std::size_t n = batch.cols();
    Matrix probs(c, n);
    Vector logits(c);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double acc = biases[j];
            for (std::size_t k = 0; k < weights.rows(); ++k) acc += batch(k, i) * weights(k, j);
            logits[j] = acc;
        }
        double top = logits[0];
        for (double z : logits) top = std::max(top, z);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            probs(j, i) = std::exp(logits[j] - top);
            total += probs(j, i);
        }
        for (std::size_t j = 0; j < c; ++j) probs(j, i) /= total;
    }
    return probs;
}

inline Vector softmax_probs(const Matrix& weights, const Vector& biases, const Vector& x) {
    return softmax_batch(weights, biases, Matrix::column(x)).col(0);
}

inline void require_labels(const std::vector<int>& labels, std::size_t n, std::size_t c) {
    if (labels.size() != n) throw std::invalid_argument("labels: count differs from batch size");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw std::invalid_argument("labels: value out of range");
}

/// Summed cross entropy, evaluated in the log domain with max-logit
/// stabilization.
inline double ce_loss(const Matrix& weights, const Vector& biases, const Matrix& batch,
                      const std::vector<int>& labels) {
    if (weights.rows() != batch.rows() || weights.cols() != biases.size())
        throw std::invalid_argument("ce_loss: dimension mismatch");
    const std::size_t c = weights.cols();
    const std::size_t n = batch.cols();
    require_labels(labels, n, c);

    double loss = 0.0;
    Vector logits(c);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double acc = biases[j];
            for (std::size_t k = 0; k < weights.rows(); ++k) acc += batch(k, i) * weights(k, j);
            logits[j] = acc;
        }
        double top = logits[0];
        for (double z : logits) top = std::max(top, z);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += std::exp(logits[j] - top);
        loss += std::log(total) - (logits[static_cast<std::size_t>(labels[i])] - top);
    }
    return loss;
}

struct CeGradient {
    Matrix weights;  // d x c
    Vector biases;   // c
};

/// dL/dF_{:,j} = sum_i d_i (p_i(j) - [y_i = j]); biases analogous.
inline CeGradient ce_grad(const Matrix& weights, const Vector& biases, const Matrix& batch,
                          const std::vector<int>& labels) {
    const std::size_t c = weights.cols();
    const std::size_t n = batch.cols();
    require_labels(labels, n, c);
    const Matrix probs = softmax_batch(weights, biases, batch);

    CeGradient grad;
    grad.weights = Matrix(weights.rows(), c);
    grad.biases.assign(c, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double residual =
                probs(j, i) - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0);
            grad.biases[j] += residual;
            for (std::size_t k = 0; k < weights.rows(); ++k)
                grad.weights(k, j) += batch(k, i) * residual;
        }
    }
    return grad;
}

/// Quadratic form of the cross-entropy Hessian in F along the direction
/// Psi: sum over class pairs j < j' of
/// (psi_j - psi_j')^T [ sum_i d_i d_i^T p_i(j) p_i(j') ] (psi_j - psi_j').
/// Non-negative for every Psi; vanishes only when all columns agree on the
/// span of the data.
inline double hessian_quadform(const Matrix& weights, const Vector& biases, const Matrix& batch,
                               const std::vector<int>& labels, const Matrix& direction) {
    if (!direction.same_shape(weights))
        throw std::invalid_argument("hessian_quadform: direction shape mismatch");
    const std::size_t c = weights.cols();
    const std::size_t n = batch.cols();
    require_labels(labels, n, c);
    const Matrix probs = softmax_batch(weights, biases, batch);

    double total = 0.0;
    Vector projected(c);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < batch.rows(); ++k) acc += direction(k, j) * batch(k, i);
            projected[j] = acc;
        }
        for (std::size_t j = 0; j + 1 < c; ++j)
            for (std::size_t j2 = j + 1; j2 < c; ++j2) {
                const double gap = projected[j] - projected[j2];
                total += probs(j, i) * probs(j2, i) * gap * gap;
            }
    }
    return total;
}

struct PenaltyResult {
    double value = 0.0;
    std::vector<Matrix> weight_grads;
};

namespace detail {

inline double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Cross-head orthogonality penalty
/// lambda * sum_j sum_{r<s} |f_j^r^T Q f_j^s| with Q = I or Q = S_w.
/// Q is a constant: no gradient flows through the scatter estimate. The
/// subgradient of |.| at 0 is taken as 0, so exactly orthogonal heads are
/// stationary.
inline PenaltyResult ortho_penalty(const MultiverseHeads& heads, const OrthoMode& mode,
                                   const PenaltyConfig& cfg) {
    validate_heads(heads);
    if (mode.kind == OrthoKind::SwOrtho &&
        (mode.within.rows() != heads.dim() || mode.within.cols() != heads.dim()))
        throw ConfigError("ortho_penalty: SwOrtho mode needs a d x d scatter matrix");

    const std::size_t m = heads.head_count();
    const std::size_t c = heads.class_count();
    PenaltyResult result;
    result.weight_grads.assign(m, Matrix(heads.dim(), c));
    if (m < 2 || cfg.lambda == 0.0) return result;

    for (std::size_t j = 0; j < c; ++j) {
        std::vector<Vector> cols(m), q_cols(m);
        for (std::size_t r = 0; r < m; ++r) {
            cols[r] = heads.weights[r].col(j);
            q_cols[r] = mode.kind == OrthoKind::SwOrtho ? matvec(mode.within, cols[r]) : cols[r];
        }
        for (std::size_t r = 0; r + 1 < m; ++r)
            for (std::size_t s = r + 1; s < m; ++s) {
                const double coupling = dot(cols[r], q_cols[s]);
                result.value += cfg.lambda * std::abs(coupling);
                const double g = cfg.lambda * detail::sign_or_zero(coupling);
                if (g != 0.0) {
                    for (std::size_t k = 0; k < heads.dim(); ++k) {
                        result.weight_grads[r](k, j) += g * q_cols[s][k];
                        result.weight_grads[s](k, j) += g * q_cols[r][k];
                    }
                }
            }
    }
    return result;
}

struct ObjectiveResult {
    double value = 0.0;
    std::vector<Matrix> weight_grads;
    std::vector<Vector> bias_grads;
    Matrix repr_grad;  // dL/dD, used when training a representation under the loss
};

/// Full multi-head objective:
/// sum_r ce_loss(F^r, b^r) + ortho_penalty + weight_decay * sum_r ||F^r||_F^2.
inline ObjectiveResult multiverse_objective(const MultiverseHeads& heads, const Matrix& batch,
                                            const std::vector<int>& labels, const OrthoMode& mode,
                                            const PenaltyConfig& cfg) {
    validate_heads(heads);
    if (heads.dim() != batch.rows())
        throw std::invalid_argument("multiverse_objective: representation dimension mismatch");
    const std::size_t m = heads.head_count();
    const std::size_t c = heads.class_count();
    const std::size_t n = batch.cols();
    require_labels(labels, n, c);

    ObjectiveResult out;
    out.weight_grads.assign(m, Matrix(heads.dim(), c));
    out.bias_grads.assign(m, Vector(c, 0.0));
    out.repr_grad = Matrix(heads.dim(), n);

    for (std::size_t r = 0; r < m; ++r) {
        out.value += ce_loss(heads.weights[r], heads.biases[r], batch, labels);
        const Matrix probs = softmax_batch(heads.weights[r], heads.biases[r], batch);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const double residual =
                    probs(j, i) - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0);
                out.bias_grads[r][j] += residual;
                for (std::size_t k = 0; k < heads.dim(); ++k) {
                    out.weight_grads[r](k, j) += batch(k, i) * residual;
                    out.repr_grad(k, i) += heads.weights[r](k, j) * residual;
                }
            }
    }

    const PenaltyResult penalty = ortho_penalty(heads, mode, cfg);
    out.value += penalty.value;
    for (std::size_t r = 0; r < m; ++r) out.weight_grads[r] += penalty.weight_grads[r];

    if (cfg.weight_decay != 0.0) {
        for (std::size_t r = 0; r < m; ++r) {
            const double norm = frobenius_norm(heads.weights[r]);
            out.value += cfg.weight_decay * norm * norm;
            Matrix decay = heads.weights[r];
            decay *= 2.0 * cfg.weight_decay;
            out.weight_grads[r] += decay;
        }
    }
    return out;
}

/// Worst normalized cross-head coupling:
/// max over j, r<s of |f_j^r^T Q f_j^s| / (||Q^{1/2} f_j^r|| ||Q^{1/2} f_j^s||),
/// with Q^{1/2} taken from the eigendecomposition of Q (negative roundoff
/// eigenvalues clamped to zero).
inline double ortho_violation(const MultiverseHeads& heads, const OrthoMode& mode) {
    validate_heads(heads);
    if (heads.head_count() < 2)
        throw std::invalid_argument("ortho_violation: need at least two heads");

    const std::size_t d = heads.dim();
    Matrix q = Matrix::identity(d);
    Matrix q_half = Matrix::identity(d);
    if (mode.kind == OrthoKind::SwOrtho) {
        if (mode.within.rows() != d || mode.within.cols() != d)
            throw ConfigError("ortho_violation: SwOrtho mode needs a d x d scatter matrix");
        q = symmetrize(mode.within);
        const EigenDecomposition eig = sym_eig(q);
        Matrix scaled = eig.vectors;
        for (std::size_t cidx = 0; cidx < d; ++cidx) {
            const double root = std::sqrt(std::max(eig.values[cidx], 0.0));
            for (std::size_t r = 0; r < d; ++r) scaled(r, cidx) *= root;
        }
        q_half = matmul(scaled, transpose(eig.vectors));
    }

    double worst = 0.0;
    const std::size_t m = heads.head_count();
    for (std::size_t j = 0; j < heads.class_count(); ++j) {
        std::vector<Vector> cols(m);
        std::vector<double> norms(m);
        for (std::size_t r = 0; r < m; ++r) {
            cols[r] = heads.weights[r].col(j);
            norms[r] = norm2(mode.kind == OrthoKind::SwOrtho ? matvec(q_half, cols[r]) : cols[r]);
            if (norms[r] == 0.0)
                throw DegenerateError("ortho_violation: class " + std::to_string(j) + " head " +
                                      std::to_string(r) + " has zero norm under Q");
        }
        for (std::size_t r = 0; r + 1 < m; ++r)
            for (std::size_t s = r + 1; s < m; ++s) {
                const double coupling =
                    mode.kind == OrthoKind::SwOrtho ? dot(cols[r], matvec(q, cols[s]))
                                                    : dot(cols[r], cols[s]);
                worst = std::max(worst, std::abs(coupling) / (norms[r] * norms[s]));
            }
    }
    return worst;
}

/// Largest per-sample disagreement between head probability vectors:
/// max over samples and head pairs of the infinity norm of the difference.
inline double prob_agreement(const MultiverseHeads& heads, const Matrix& batch) {
    validate_heads(heads);
    if (heads.head_count() < 2)
        throw std::invalid_argument("prob_agreement: need at least two heads");
    const std::size_t m = heads.head_count();
    std::vector<Matrix> probs(m);
    for (std::size_t r = 0; r < m; ++r)
        probs[r] = softmax_batch(heads.weights[r], heads.biases[r], batch);

    double worst = 0.0;
    for (std::size_t r = 0; r + 1 < m; ++r)
        for (std::size_t s = r + 1; s < m; ++s)
            for (std::size_t i = 0; i < batch.cols(); ++i)
                for (std::size_t j = 0; j < heads.class_count(); ++j)
                    worst = std::max(worst, std::abs(probs[r](j, i) - probs[s](j, i)));
    return worst;
}

}  // namespace multiverse
