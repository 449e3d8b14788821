#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "multiverse/errors.hpp"
#include "multiverse/matrix.hpp"

namespace multiverse {

/// Eigenvalues sorted descending; `vectors` holds the matching orthonormal
/// eigenvectors as columns.
struct EigenDecomposition {
    Vector values;
    Matrix vectors;
};

/// Generalized pairs A v = gamma B v, values descending. The vectors are
/// B-orthonormal, not Euclidean-orthonormal.
struct GeneralizedEigenDecomposition {
    Vector values;
    Matrix vectors;
};

/// Scale-aware jitter for positive-definite factorizations of B:
/// 1e-6 * trace(B) / dim. Zero for the zero matrix.
inline double default_jitter(const Matrix& b) {
    if (b.rows() == 0) return 0.0;
    return 1e-6 * trace(b) / static_cast<double>(b.rows());
}

namespace detail {

inline double off_diagonal_norm(const Matrix& a) {
    double acc = 0.0;
    for (std::size_t p = 0; p < a.rows(); ++p)
        for (std::size_t q = p + 1; q < a.cols(); ++q) acc += 2.0 * a(p, q) * a(p, q);
    return std::sqrt(acc);
}

/// Flip eigenvector signs so the entry of largest magnitude is positive.
/// Pins an arbitrary sign choice, which keeps artifacts reproducible.
inline void canonicalize_columns(Matrix& v) {
    for (std::size_t c = 0; c < v.cols(); ++c) {
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t r = 0; r < v.rows(); ++r) {
            const double m = std::abs(v(r, c));
            if (m > best) {
                best = m;
                arg = r;
            }
        }
        if (v(arg, c) < 0.0)
            for (std::size_t r = 0; r < v.rows(); ++r) v(r, c) = -v(r, c);
    }
}

}  // namespace detail

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Converges when
/// the off-diagonal Frobenius norm falls below 1e-14 * ||A||_F, capped at
/// 100 sweeps. Accurate and unconditionally stable at the small dimensions
/// used here (d <= 512).
inline EigenDecomposition sym_eig(const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw std::invalid_argument("sym_eig: matrix must be square and non-empty");
    if (!is_symmetric(a))
        throw std::invalid_argument("sym_eig: matrix is not symmetric to 1e-12");

    const std::size_t d = a.rows();
    Matrix b = symmetrize(a);
    Matrix v = Matrix::identity(d);
    const double scale = frobenius_norm(b);
    const double threshold = 1e-14 * scale;

    for (int sweep = 0; sweep < 100 && scale > 0.0; ++sweep) {
        if (detail::off_diagonal_norm(b) <= threshold) break;
        for (std::size_t p = 0; p + 1 < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = b(p, q);
                if (apq == 0.0) continue;
                const double theta = (b(q, q) - b(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                const double app = b(p, p);
                const double aqq = b(q, q);
                b(p, p) = app - t * apq;
                b(q, q) = aqq + t * apq;
                b(p, q) = 0.0;
                b(q, p) = 0.0;
                for (std::size_t r = 0; r < d; ++r) {
                    if (r != p && r != q) {
                        const double arp = b(r, p);
                        const double arq = b(r, q);
                        b(r, p) = b(p, r) = arp - s * (arq + tau * arp);
                        b(r, q) = b(q, r) = arq + s * (arp - tau * arq);
                    }
                    const double vrp = v(r, p);
                    const double vrq = v(r, q);
                    v(r, p) = vrp - s * (vrq + tau * vrp);
                    v(r, q) = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return b(i, i) > b(j, j); });

    EigenDecomposition out;
    out.values.resize(d);
    out.vectors = Matrix(d, d);
    for (std::size_t k = 0; k < d; ++k) {
        out.values[k] = b(order[k], order[k]);
        for (std::size_t r = 0; r < d; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    detail::canonicalize_columns(out.vectors);
    return out;
}

/// Lower-triangular Cholesky factor of A + jitter*I with its log-determinant
/// and the triangular solves built on it.
class Cholesky {
public:
    Cholesky(const Matrix& a, double jitter) {
        if (a.rows() != a.cols() || a.rows() == 0)
            throw std::invalid_argument("cholesky: matrix must be square and non-empty");
        if (!is_symmetric(a))
            throw std::invalid_argument("cholesky: matrix is not symmetric");
        if (jitter < 0.0) throw std::invalid_argument("cholesky: jitter must be >= 0");

        const std::size_t d = a.rows();
        lower_ = Matrix(d, d);
        log_det_ = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double diag = a(j, j) + jitter;
            for (std::size_t k = 0; k < j; ++k) diag -= lower_(j, k) * lower_(j, k);
            if (diag <= 0.0)
                throw IndefiniteError("cholesky: matrix not positive definite, pivot " +
                                          std::to_string(j + 1) + " is non-positive",
                                      j + 1);
            const double ljj = std::sqrt(diag);
            lower_(j, j) = ljj;
            log_det_ += 2.0 * std::log(ljj);
            for (std::size_t i = j + 1; i < d; ++i) {
                double acc = 0.5 * (a(i, j) + a(j, i));
                for (std::size_t k = 0; k < j; ++k) acc -= lower_(i, k) * lower_(j, k);
                lower_(i, j) = acc / ljj;
            }
        }
    }

    const Matrix& lower() const { return lower_; }
    double log_det() const { return log_det_; }
    std::size_t dim() const { return lower_.rows(); }

    /// Solve L z = b.
    Vector solve_lower(const Vector& b) const {
        const std::size_t d = dim();
        Vector z(b);
        for (std::size_t i = 0; i < d; ++i) {
            double acc = z[i];
            for (std::size_t k = 0; k < i; ++k) acc -= lower_(i, k) * z[k];
            z[i] = acc / lower_(i, i);
        }
        return z;
    }

    /// Solve L^T x = b.
    Vector solve_upper(const Vector& b) const {
        const std::size_t d = dim();
        Vector x(b);
        for (std::size_t ii = d; ii-- > 0;) {
            double acc = x[ii];
            for (std::size_t k = ii + 1; k < d; ++k) acc -= lower_(k, ii) * x[k];
            x[ii] = acc / lower_(ii, ii);
        }
        return x;
    }

    /// Solve (L L^T) x = b.
    Vector solve(const Vector& b) const { return solve_upper(solve_lower(b)); }

    Matrix solve(const Matrix& b) const {
        Matrix x(b.rows(), b.cols());
        for (std::size_t c = 0; c < b.cols(); ++c) x.set_col(c, solve(b.col(c)));
        return x;
    }

private:
    Matrix lower_;
    double log_det_ = 0.0;
};

inline Cholesky cholesky(const Matrix& a, double jitter = 0.0) { return Cholesky(a, jitter); }

/// Generalized symmetric-definite eigenproblem A v = gamma B v, reduced via
/// B + reg*I = L L^T, C = L^-1 A L^-T, then the symmetric solve, with the
/// vectors mapped back through v = L^-T w.
inline GeneralizedEigenDecomposition gen_sym_eig(const Matrix& a, const Matrix& b,
                                                 double regularizer) {
    if (!a.same_shape(b) || a.rows() != a.cols())
        throw std::invalid_argument("gen_sym_eig: A and B must be square and same shape");
    const Cholesky chol(b, regularizer);

    const std::size_t d = a.rows();
    // C = L^-1 A L^-T, built column-by-column through triangular solves.
    Matrix y(d, d);  // y = L^-1 A
    for (std::size_t c = 0; c < d; ++c) y.set_col(c, chol.solve_lower(a.col(c)));
    Matrix cmat(d, d);  // (L^-1 y^T)^T = y L^-T
    for (std::size_t r = 0; r < d; ++r) {
        const Vector z = chol.solve_lower(y.row(r));
        for (std::size_t c = 0; c < d; ++c) cmat(r, c) = z[c];
    }
    const EigenDecomposition inner = sym_eig(symmetrize(cmat));

    GeneralizedEigenDecomposition out;
    out.values = inner.values;
    out.vectors = Matrix(d, d);
    for (std::size_t k = 0; k < d; ++k)
        out.vectors.set_col(k, chol.solve_upper(inner.vectors.col(k)));
    return out;
}

/// Gram spectrum of K = D D^T plus the count of eigenvalues above
/// `kEffectiveRankTau` of the largest one.
inline constexpr double kEffectiveRankTau = 1e-3;

struct GramSpectrum {
    EigenDecomposition eig;
    std::size_t effective_rank = 0;
};

inline std::size_t effective_rank(const Vector& values, double tau = kEffectiveRankTau) {
    if (values.empty()) return 0;
    const double cutoff = tau * values.front();
    std::size_t n = 0;
    for (double v : values)
        if (v > cutoff) ++n;
    return values.front() > 0.0 ? n : 0;
}

inline GramSpectrum gram_spectrum(const Matrix& d) {
    if (d.cols() == 0 || d.rows() == 0)
        throw std::invalid_argument("gram_spectrum: empty feature matrix");
    Matrix k(d.rows(), d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t j = i; j < d.rows(); ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < d.cols(); ++t) acc += d(i, t) * d(j, t);
            k(i, j) = acc;
            k(j, i) = acc;
        }
    GramSpectrum out;
    out.eig = sym_eig(k);
    out.effective_rank = effective_rank(out.eig.values);
    return out;
}

}  // namespace multiverse
