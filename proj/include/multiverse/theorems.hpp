#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "multiverse/eigen.hpp"
#include "multiverse/errors.hpp"
#include "multiverse/loss.hpp"
#include "multiverse/matrix.hpp"
#include "multiverse/scatter.hpp"

namespace multiverse {

/// One verified inequality: holds iff lhs <= rhs + slack.
struct BoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    bool holds = false;
    std::string context;

    static BoundCheck make(double lhs, double rhs, double slack, std::string context) {
        return {lhs, rhs, slack, lhs <= rhs + slack, std::move(context)};
    }
};

/// Adding v to every classifier column and s to every bias leaves the
/// cross-entropy loss unchanged; the check asserts the difference is zero to
/// 1e-10 * (1 + |L|).
inline BoundCheck check_shift_invariance(const Matrix& weights, const Vector& biases,
                                         const Matrix& batch, const std::vector<int>& labels,
                                         const Vector& shift_v, double shift_s) {
    if (shift_v.size() != weights.rows())
        throw std::invalid_argument("check_shift_invariance: shift dimension mismatch");
    const double base = ce_loss(weights, biases, batch, labels);
    Matrix shifted_w = weights;
    for (std::size_t j = 0; j < weights.cols(); ++j)
        for (std::size_t k = 0; k < weights.rows(); ++k) shifted_w(k, j) += shift_v[k];
    Vector shifted_b = biases;
    for (double& x : shifted_b) x += shift_s;
    const double shifted = ce_loss(shifted_w, shifted_b, batch, labels);

    std::ostringstream ctx;
    ctx << "shift invariance: |L(F+v1^T, b+s1) - L(F,b)| with ||v||=" << norm2(shift_v)
        << " s=" << shift_s;
    return BoundCheck::make(std::abs(shifted - base), 0.0, 1e-10 * (1.0 + std::abs(base)),
                            ctx.str());
}

/// How far F1 - F2 is from the rank-one form v 1^T that any two minimizers
/// on full-rank data must satisfy. Zero when every column of the difference
/// is the same vector.
inline double rank1_difference_residual(const Matrix& f1, const Matrix& f2) {
    if (!f1.same_shape(f2))
        throw std::invalid_argument("rank1_difference_residual: shape mismatch");
    Matrix diff = f1;
    diff -= f2;
    Vector row_mean(diff.rows(), 0.0);
    for (std::size_t k = 0; k < diff.rows(); ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < diff.cols(); ++j) acc += diff(k, j);
        row_mean[k] = acc / static_cast<double>(diff.cols());
    }
    double num = 0.0;
    for (std::size_t k = 0; k < diff.rows(); ++k)
        for (std::size_t j = 0; j < diff.cols(); ++j) {
            const double r = diff(k, j) - row_mean[k];
            num += r * r;
        }
    return std::sqrt(num) / std::max(frobenius_norm(diff), 1e-300);
}

/// Least-squares solution of F^T v = -(||f_j||^2)_j, the constraint any
/// second orthogonal minimizer forces on F in the over-determined regime
/// c > d, together with its relative residual.
struct EllipseResult {
    Vector v;
    double residual = 0.0;
    std::string note;
};

inline EllipseResult ellipse_constraint_residual(const Matrix& weights) {
    const std::size_t d = weights.rows();
    const std::size_t c = weights.cols();
    if (c <= d)
        throw std::invalid_argument("ellipse_constraint_residual: needs the over-determined "
                                    "regime c > d");

    Vector squared_norms(c);
    for (std::size_t j = 0; j < c; ++j) {
        const Vector col = weights.col(j);
        squared_norms[j] = dot(col, col);
    }
    const double target_norm = norm2(squared_norms);

    EllipseResult result;
    if (target_norm == 0.0) {
        result.v.assign(d, 0.0);
        result.note = "zero classifier, constraint trivially satisfied";
        return result;
    }

    // Normal equations (F F^T) v = -F w, with an eigendecomposition
    // fallback when F is rank deficient.
    Matrix gram(d, d);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) acc += weights(a, j) * weights(b, j);
            gram(a, b) = acc;
            gram(b, a) = acc;
        }
    Vector rhs(d, 0.0);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t j = 0; j < c; ++j) rhs[a] -= weights(a, j) * squared_norms[j];

    try {
        result.v = cholesky(gram).solve(rhs);
    } catch (const IndefiniteError&) {
        const EigenDecomposition eig = sym_eig(gram);
        const double cutoff = 1e-12 * std::max(eig.values.front(), 0.0);
        result.v.assign(d, 0.0);
        for (std::size_t k = 0; k < d; ++k) {
            if (eig.values[k] <= cutoff) continue;
            const Vector basis = eig.vectors.col(k);
            axpy(dot(basis, rhs) / eig.values[k], basis, result.v);
        }
        result.note = "rank-deficient F, pseudo-inverse least squares";
    }

    Vector violation = matvec_transposed(weights, result.v);
    for (std::size_t j = 0; j < c; ++j) violation[j] += squared_norms[j];
    result.residual = norm2(violation) / target_norm;
    return result;
}

/// Minimize the convex single-head cross-entropy in (F, b) by damped Newton
/// with a small ridge (the loss is flat along the shift direction). Used by
/// the optimality-dependent theorem experiments.
struct HeadOptimum {
    Matrix weights;
    Vector biases;
    double loss = 0.0;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
};

inline HeadOptimum minimize_head_loss(const Matrix& batch, const std::vector<int>& labels,
                                      Matrix weights, Vector biases, double tol = 1e-9,
                                      std::size_t max_iter = 200) {
    const std::size_t d = batch.rows();
    const std::size_t c = weights.cols();
    const std::size_t n = batch.cols();
    const std::size_t aug = d + 1;          // weight rows plus the bias row
    const std::size_t dim = aug * c;

    auto loss_of = [&](const Matrix& w, const Vector& b) { return ce_loss(w, b, batch, labels); };

    HeadOptimum out;
    out.weights = std::move(weights);
    out.biases = std::move(biases);
    out.loss = loss_of(out.weights, out.biases);

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        out.iterations = iter;
        const CeGradient grad = ce_grad(out.weights, out.biases, batch, labels);
        double gsq = 0.0;
        for (double g : grad.weights.storage()) gsq += g * g;
        for (double g : grad.biases) gsq += g * g;
        out.grad_norm = std::sqrt(gsq);
        if (out.grad_norm <= tol) return out;

        // Hessian over augmented coordinates (d features + bias), class-major.
        const Matrix probs = softmax_batch(out.weights, out.biases, batch);
        Matrix hess(dim, dim);
        Vector augmented(aug);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < d; ++k) augmented[k] = batch(k, i);
            augmented[d] = 1.0;
            for (std::size_t j = 0; j < c; ++j)
                for (std::size_t j2 = j; j2 < c; ++j2) {
                    const double coeff = j == j2 ? probs(j, i) * (1.0 - probs(j, i))
                                                 : -probs(j, i) * probs(j2, i);
                    if (coeff == 0.0) continue;
                    for (std::size_t u = 0; u < aug; ++u)
                        for (std::size_t v = 0; v < aug; ++v) {
                            const double x = coeff * augmented[u] * augmented[v];
                            hess(j * aug + u, j2 * aug + v) += x;
                            if (j != j2) hess(j2 * aug + v, j * aug + u) += x;
                        }
                }
        }
        const double ridge = 1e-9 * (trace(hess) / static_cast<double>(dim)) + 1e-30;

        Vector gradient(dim);
        for (std::size_t j = 0; j < c; ++j) {
            for (std::size_t u = 0; u < d; ++u) gradient[j * aug + u] = grad.weights(u, j);
            gradient[j * aug + d] = grad.biases[j];
        }
        Vector step = cholesky(hess, ridge).solve(gradient);
        for (double& x : step) x = -x;

        const double directional = dot(gradient, step);
        double scale = 1.0;
        Matrix trial_w = out.weights;
        Vector trial_b = out.biases;
        for (int backtrack = 0; backtrack < 60; ++backtrack) {
            for (std::size_t j = 0; j < c; ++j) {
                for (std::size_t u = 0; u < d; ++u)
                    trial_w(u, j) = out.weights(u, j) + scale * step[j * aug + u];
                trial_b[j] = out.biases[j] + scale * step[j * aug + d];
            }
            const double trial_loss = loss_of(trial_w, trial_b);
            if (trial_loss <= out.loss + 1e-4 * scale * directional) {
                out.weights = trial_w;
                out.biases = trial_b;
                out.loss = trial_loss;
                break;
            }
            scale *= 0.5;
        }
    }
    const CeGradient grad = ce_grad(out.weights, out.biases, batch, labels);
    double gsq = 0.0;
    for (double g : grad.weights.storage()) gsq += g * g;
    for (double g : grad.biases) gsq += g * g;
    out.grad_norm = std::sqrt(gsq);
    return out;
}

namespace detail {

/// alpha_j = -||f_j||^2 / (v^T f_j), the coefficient that makes
/// f_j + alpha_j v orthogonal to f_j.
inline double pair_alpha(const Vector& column, const Vector& direction) {
    const double denom = dot(direction, column);
    const double scale = norm2(column);
    if (std::abs(denom) <= 1e-10 * scale)
        throw DegenerateError("orthogonal construction: v^T f_j is numerically zero; the "
                              "closed-form coefficient divides by it");
    return -dot(column, column) / denom;
}

inline double worst_pair_orthogonality(const Matrix& f1, const Matrix& f2) {
    double worst = 0.0;
    for (std::size_t j = 0; j < f1.cols(); ++j) {
        const Vector a = f1.col(j);
        const Vector b = f2.col(j);
        const double na = norm2(a);
        const double nb = norm2(b);
        if (na == 0.0 || nb == 0.0) continue;
        worst = std::max(worst, std::abs(dot(a, b)) / (na * nb));
    }
    return worst;
}

}  // namespace detail

/// Second head orthogonal to an optimized first head, built along the
/// eigenvector of the smallest gram eigenvalue, with the bound
/// J <= 2 L_hat + A lambda_d + delta. The slack delta accounts for the first
/// head being a finite-precision optimum rather than the exact minimizer.
struct PairConstruction {
    Matrix second_weights;
    Vector alpha;
    double ortho_residual = 0.0;
    BoundCheck check;
};

inline PairConstruction construct_pair_solution(const Matrix& weights, const Vector& biases,
                                                const Matrix& batch,
                                                const std::vector<int>& labels) {
    const std::size_t d = batch.rows();
    const std::size_t c = weights.cols();
    const GramSpectrum gram = gram_spectrum(batch);
    const Vector direction = gram.eig.vectors.col(d - 1);
    const double lambda_min = std::max(gram.eig.values[d - 1], 0.0);

    PairConstruction out;
    out.alpha.resize(c);
    out.second_weights = weights;
    for (std::size_t j = 0; j < c; ++j) {
        out.alpha[j] = detail::pair_alpha(weights.col(j), direction);
        for (std::size_t k = 0; k < d; ++k)
            out.second_weights(k, j) += out.alpha[j] * direction[k];
    }
    out.ortho_residual = detail::worst_pair_orthogonality(weights, out.second_weights);

    const double base_loss = ce_loss(weights, biases, batch, labels);
    const double second_loss = ce_loss(out.second_weights, biases, batch, labels);
    const double joint = base_loss + second_loss;

    double spread = 0.0;
    for (std::size_t j = 0; j + 1 < c; ++j)
        for (std::size_t j2 = j + 1; j2 < c; ++j2) {
            const double gap = out.alpha[j] - out.alpha[j2];
            spread += gap * gap;
        }
    spread *= 0.5;

    const CeGradient grad = ce_grad(weights, biases, batch, labels);
    const double slack =
        frobenius_norm(grad.weights) * norm2(out.alpha) + 1e-12 * (1.0 + std::abs(joint));

    std::ostringstream ctx;
    ctx << "two-head bound: J <= 2L + A*lambda_min, A=" << spread
        << " lambda_min=" << lambda_min << " grad_norm=" << frobenius_norm(grad.weights);
    out.check = BoundCheck::make(joint, 2.0 * base_loss + spread * lambda_min, slack, ctx.str());
    return out;
}

/// m pairwise-orthogonal heads built in the span of the m-1 smallest gram
/// eigenvectors. The coefficient tensor solves the bilinear orthogonality
/// system; m = 2 reuses the closed form, larger m a min-norm damped Newton.
struct MultiConstruction {
    MultiverseHeads heads;
    std::vector<Matrix> alpha;  // per head r >= 2: (m-1) x c coefficients
    double ortho_residual = 0.0;
    BoundCheck check;
};

namespace detail {

/// Solve, for one class column f, the system making all head pairs
/// orthogonal: unknowns a^2..a^m in the spare-direction basis (q = m-1
/// columns of U, orthonormal), equations over pairs r < s:
///   (f + U a^r)^T (f + U a^s) = 0  with a^1 = 0.
/// Levenberg-Marquardt steps through the minimum-norm pseudo-inverse keep
/// the solution near zero norm.
inline std::vector<Vector> solve_orthogonality_system(const Vector& f, const Matrix& spare,
                                                      std::size_t m, std::size_t class_index) {
    const std::size_t q = spare.cols();
    const std::size_t unknowns = (m - 1) * q;
    const double base = dot(f, f);
    const Vector projected = matvec_transposed(spare, f);  // U^T f

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t r = 1; r <= m; ++r)
        for (std::size_t s = r + 1; s <= m; ++s) pairs.emplace_back(r, s);
    const std::size_t eqs = pairs.size();

    // a[r] for heads r = 2..m, stored at index r-2.
    std::vector<Vector> a(m - 1, Vector(q, 0.0));
    auto residuals = [&]() {
        Vector res(eqs);
        for (std::size_t e = 0; e < eqs; ++e) {
            const auto [r, s] = pairs[e];
            double value = base;
            if (r >= 2) value += dot(projected, a[r - 2]);
            value += dot(projected, a[s - 2]);
            if (r >= 2) value += dot(a[r - 2], a[s - 2]);
            res[e] = value;
        }
        return res;
    };

    Vector res = residuals();
    double res_norm = norm_inf(res);
    const double tol = 1e-12 * (1.0 + base);
    double damping = 1e-6 * (1.0 + dot(projected, projected));

    for (std::size_t iter = 0; iter < 200; ++iter) {
        if (res_norm <= tol) return a;
        // Jacobian, eqs x unknowns.
        Matrix jac(eqs, unknowns);
        for (std::size_t e = 0; e < eqs; ++e) {
            const auto [r, s] = pairs[e];
            for (std::size_t k = 0; k < q; ++k) {
                if (r >= 2)
                    jac(e, (r - 2) * q + k) = projected[k] + a[s - 2][k];
                jac(e, (s - 2) * q + k) = projected[k] + (r >= 2 ? a[r - 2][k] : 0.0);
            }
        }
        // Minimum-norm step: delta = J^T (J J^T + mu I)^-1 (-res).
        Matrix normal(eqs, eqs);
        for (std::size_t e = 0; e < eqs; ++e)
            for (std::size_t e2 = e; e2 < eqs; ++e2) {
                double acc = 0.0;
                for (std::size_t k = 0; k < unknowns; ++k) acc += jac(e, k) * jac(e2, k);
                normal(e, e2) = acc;
                normal(e2, e) = acc;
            }
        bool accepted = false;
        for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
            Vector neg = res;
            for (double& x : neg) x = -x;
            Vector multipliers;
            try {
                multipliers = cholesky(normal, damping).solve(neg);
            } catch (const IndefiniteError&) {
                damping *= 4.0;
                continue;
            }
            std::vector<Vector> trial = a;
            for (std::size_t e = 0; e < eqs; ++e) {
                const auto [r, s] = pairs[e];
                for (std::size_t k = 0; k < q; ++k) {
                    if (r >= 2) trial[r - 2][k] += multipliers[e] * jac(e, (r - 2) * q + k);
                    trial[s - 2][k] += multipliers[e] * jac(e, (s - 2) * q + k);
                }
            }
            std::swap(a, trial);
            Vector trial_res = residuals();
            const double trial_norm = norm_inf(trial_res);
            if (trial_norm < res_norm) {
                res = std::move(trial_res);
                res_norm = trial_norm;
                damping = std::max(damping * 0.25, 1e-14 * (1.0 + dot(projected, projected)));
                accepted = true;
            } else {
                std::swap(a, trial);  // revert
                damping *= 4.0;
            }
        }
        if (!accepted) break;
    }
    if (res_norm <= tol) return a;
    throw ConstructionError("orthogonality system did not converge for class " +
                                std::to_string(class_index),
                            class_index);
}

}  // namespace detail

inline MultiConstruction construct_m_solutions(const Matrix& weights, const Vector& biases,
                                               const Matrix& batch,
                                               const std::vector<int>& labels, std::size_t m) {
    const std::size_t d = batch.rows();
    const std::size_t c = weights.cols();
    if (m < 2) throw std::invalid_argument("construct_m_solutions: need m >= 2");
    if (m > d) throw std::invalid_argument("construct_m_solutions: need m <= d");

    const GramSpectrum gram = gram_spectrum(batch);
    const std::size_t q = m - 1;
    Matrix spare(d, q);  // column l-1 holds the eigenvector of lambda_{d-l+1}
    Vector spare_values(q);
    for (std::size_t l = 1; l <= q; ++l) {
        spare.set_col(l - 1, gram.eig.vectors.col(d - l));
        spare_values[l - 1] = std::max(gram.eig.values[d - l], 0.0);
    }

    MultiConstruction out;
    out.alpha.assign(m - 1, Matrix(q, c));
    for (std::size_t j = 0; j < c; ++j) {
        if (m == 2) {
            out.alpha[0](0, j) = detail::pair_alpha(weights.col(j), spare.col(0));
        } else {
            const auto coeffs =
                detail::solve_orthogonality_system(weights.col(j), spare, m, j);
            for (std::size_t r = 0; r < m - 1; ++r)
                for (std::size_t l = 0; l < q; ++l) out.alpha[r](l, j) = coeffs[r][l];
        }
    }

    out.heads.weights.push_back(weights);
    out.heads.biases.push_back(biases);
    for (std::size_t r = 0; r < m - 1; ++r) {
        Matrix head = weights;
        for (std::size_t j = 0; j < c; ++j)
            for (std::size_t l = 0; l < q; ++l)
                for (std::size_t k = 0; k < d; ++k)
                    head(k, j) += out.alpha[r](l, j) * spare(k, l);
        out.heads.weights.push_back(std::move(head));
        out.heads.biases.push_back(biases);
    }

    for (std::size_t r = 0; r + 1 < m; ++r)
        for (std::size_t s = r + 1; s < m; ++s)
            out.ortho_residual =
                std::max(out.ortho_residual, detail::worst_pair_orthogonality(
                                                 out.heads.weights[r], out.heads.weights[s]));

    const double base_loss = ce_loss(weights, biases, batch, labels);
    double joint = base_loss;
    for (std::size_t r = 1; r < m; ++r)
        joint += ce_loss(out.heads.weights[r], biases, batch, labels);

    // Bound terms: A_l = 1/2 sum_{j<j'} sum_r (alpha_{jlr} - alpha_{j'lr})^2.
    double bound = static_cast<double>(m) * base_loss;
    for (std::size_t l = 0; l < q; ++l) {
        double spread = 0.0;
        for (std::size_t j = 0; j + 1 < c; ++j)
            for (std::size_t j2 = j + 1; j2 < c; ++j2)
                for (std::size_t r = 0; r < m - 1; ++r) {
                    const double gap = out.alpha[r](l, j) - out.alpha[r](l, j2);
                    spread += gap * gap;
                }
        bound += 0.5 * spread * spare_values[l];
    }

    const CeGradient grad = ce_grad(weights, biases, batch, labels);
    double slack = 1e-12 * (1.0 + std::abs(joint));
    for (std::size_t r = 0; r < m - 1; ++r)
        slack += frobenius_norm(grad.weights) * frobenius_norm(out.alpha[r]);

    std::ostringstream ctx;
    ctx << m << "-head bound: J <= mL + sum_l A_l lambda_{d-l+1}, grad_norm="
        << frobenius_norm(grad.weights);
    out.check = BoundCheck::make(joint, bound, slack, ctx.str());
    return out;
}

/// The inverse-spectrum identities: for generalized pairs (gamma, v) of
/// (S_b, S_w) and v' = (S_b + S_w) v, both
///   (S_b+S_w)^-1 v' = gamma/(1+gamma) S_b^-1 v'
///   S_b (S_b+S_w)^-1 v' = gamma/(1+gamma) v'
/// must hold. Returns the worst normalized residual across the spectrum.
inline double check_inverse_spectrum(const Matrix& between, const Matrix& within) {
    if (!between.same_shape(within) || between.rows() != between.cols())
        throw std::invalid_argument("check_inverse_spectrum: shape mismatch");
    Matrix total = between;
    total += within;
    const Cholesky chol_between(between, 0.0);
    const Cholesky chol_total(total, 0.0);
    const GeneralizedEigenDecomposition gen = gen_sym_eig(between, within, 0.0);

    double worst = 0.0;
    for (std::size_t k = 0; k < gen.values.size(); ++k) {
        Vector v = gen.vectors.col(k);
        const double scale = norm2(v);
        if (scale == 0.0) continue;
        for (double& x : v) x /= scale;
        const double gamma = gen.values[k];
        const double mapped = gamma / (1.0 + gamma);
        const Vector v_prime = matvec(total, v);

        const Vector lhs1 = chol_total.solve(v_prime);
        const Vector rhs1 = mapped * chol_between.solve(v_prime);
        const double res1 = norm2(lhs1 - rhs1) / (norm2(lhs1) + norm2(rhs1) + 1e-300);

        const Vector lhs2 = matvec(between, chol_total.solve(v_prime));
        const Vector rhs2 = mapped * v_prime;
        const double res2 = norm2(lhs2 - rhs2) / (norm2(v_prime) + 1e-300);

        worst = std::max(worst, std::max(res1, res2));
    }
    return worst;
}

namespace detail {

inline Matrix assemble_hypothesis(const Matrix& between, const Matrix& within, bool same) {
    const std::size_t d = between.rows();
    Matrix sigma(2 * d, 2 * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double total = between(i, j) + within(i, j);
            sigma(i, j) = total;
            sigma(d + i, d + j) = total;
            if (same) {
                sigma(i, d + j) = between(i, j);
                sigma(d + i, j) = between(i, j);
            }
        }
    return sigma;
}

}  // namespace detail

/// Hypothesis quadratic-form ratio for a centered pair whose transformed
/// points have Fisher ratio below T: must land in [1 - 2T, 1 + 6T]. Points
/// with ratio >= T violate the premise, which is an error, not a bound
/// failure.
inline BoundCheck check_jb_fisher_bound(const Matrix& between, const Matrix& within,
                                        const Vector& x1, const Vector& x2, double t_bound) {
    const std::size_t d = between.rows();
    if (x1.size() != d || x2.size() != d)
        throw std::invalid_argument("check_jb_fisher_bound: dimension mismatch");
    if (!(t_bound > 0.0))
        throw std::invalid_argument("check_jb_fisher_bound: T must be positive");
    Matrix total = between;
    total += within;

    const Vector t1 = matvec(total, x1);
    const Vector t2 = matvec(total, x2);
    const double sigma1 = fisher_ratio_exact(t1, between, within);
    const double sigma2 = fisher_ratio_exact(t2, between, within);
    if (sigma1 >= t_bound || sigma2 >= t_bound) {
        std::ostringstream msg;
        msg << "jb fisher bound premise violated: sigma(d'_1)=" << sigma1
            << " sigma(d'_2)=" << sigma2 << " not both below T=" << t_bound;
        throw PremiseError(msg.str());
    }

    const Cholesky chol_same(detail::assemble_hypothesis(between, within, true), 0.0);
    const Cholesky chol_diff(detail::assemble_hypothesis(between, within, false), 0.0);
    Vector stacked(2 * d);
    for (std::size_t k = 0; k < d; ++k) {
        stacked[k] = x1[k];
        stacked[d + k] = x2[k];
    }
    const Vector z_same = chol_same.solve_lower(stacked);
    const Vector z_diff = chol_diff.solve_lower(stacked);
    const double q_same = dot(z_same, z_same);
    const double q_diff = dot(z_diff, z_diff);
    if (q_diff <= 0.0)
        throw std::invalid_argument("check_jb_fisher_bound: degenerate zero pair");
    const double ratio = q_same / q_diff;

    std::ostringstream ctx;
    ctx << "jb quadratic-form ratio " << ratio << " vs band [1-2T, 1+6T], T=" << t_bound
        << " sigma=(" << sigma1 << "," << sigma2 << ")";
    const double outside =
        std::max(1.0 - 2.0 * t_bound - ratio, ratio - (1.0 + 6.0 * t_bound));
    return BoundCheck::make(outside, 0.0, 1e-10 * (1.0 + std::abs(ratio)), ctx.str());
}

/// m S_w-orthogonal classifiers with Fisher ratio at least theta force the
/// Fisher spectrum's L1 norm up to sqrt(m) * theta.
inline BoundCheck check_fisher_sum_bound(const std::vector<Vector>& classifiers,
                                         const ScatterStats& stats, double theta) {
    if (classifiers.empty())
        throw std::invalid_argument("check_fisher_sum_bound: need at least one classifier");
    const std::size_t m = classifiers.size();

    std::vector<double> within_energy(m);
    for (std::size_t r = 0; r < m; ++r) {
        if (classifiers[r].size() != stats.dim())
            throw std::invalid_argument("check_fisher_sum_bound: dimension mismatch");
        within_energy[r] = quadratic_form(classifiers[r], stats.within);
        if (within_energy[r] <= 0.0)
            throw PremiseError("check_fisher_sum_bound: classifier " + std::to_string(r) +
                               " has non-positive S_w energy");
    }
    for (std::size_t r = 0; r + 1 < m; ++r)
        for (std::size_t s = r + 1; s < m; ++s) {
            const double coupling = dot(classifiers[r], matvec(stats.within, classifiers[s]));
            const double normalized =
                std::abs(coupling) / std::sqrt(within_energy[r] * within_energy[s]);
            if (normalized > 1e-8)
                throw PremiseError("check_fisher_sum_bound: classifiers " + std::to_string(r) +
                                   " and " + std::to_string(s) + " are not S_w-orthogonal (" +
                                   std::to_string(normalized) + ")");
        }
    for (std::size_t r = 0; r < m; ++r) {
        const double ratio =
            quadratic_form(classifiers[r], stats.between) / within_energy[r];
        if (ratio < theta)
            throw PremiseError("check_fisher_sum_bound: classifier " + std::to_string(r) +
                               " has Fisher ratio " + std::to_string(ratio) +
                               " below theta");
    }

    const GeneralizedEigenDecomposition gen = gen_sym_eig(stats.between, stats.within, 0.0);
    double l1 = 0.0;
    for (double g : gen.values) l1 += g;

    std::ostringstream ctx;
    ctx << "fisher sum bound: sqrt(m)*theta <= sum gamma_k, m=" << m << " theta=" << theta;
    return BoundCheck::make(std::sqrt(static_cast<double>(m)) * theta, l1,
                            1e-8 * (1.0 + theta), ctx.str());
}

}  // namespace multiverse
