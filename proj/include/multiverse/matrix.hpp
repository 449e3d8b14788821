#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "multiverse/errors.hpp"

namespace multiverse {

using Vector = std::vector<double>;

/// Dense real matrix, row-major. The universal carrier for feature blocks,
/// classifier weights, kernels and scatter matrices.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    /// Row-by-row brace construction, mostly for tests and small fixtures.
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw std::invalid_argument("Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(const Vector& d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    /// Column vector as a d x 1 matrix.
    static Matrix column(const Vector& v) {
        Matrix m(v.size(), 1);
        m.data_ = v;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    Vector col(std::size_t c) const {
        Vector v(rows_);
        for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
        return v;
    }

    Vector row(std::size_t r) const {
        Vector v(cols_);
        for (std::size_t c = 0; c < cols_; ++c) v[c] = (*this)(r, c);
        return v;
    }

    void set_col(std::size_t c, const Vector& v) {
        for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
    }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Matrix& operator-=(const Matrix& o) {
        require_same_shape(o, "-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& x : data_) x *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    void require_same_shape(const Matrix& o, const char* op) const {
        if (!same_shape(o))
            throw std::invalid_argument(std::string("Matrix: shape mismatch in ") + op);
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

/// A * v for a column vector v.
inline Vector matvec(const Matrix& a, const Vector& v) {
    if (a.cols() != v.size())
        throw std::invalid_argument("matvec: dimension mismatch");
    Vector out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * v[k];
        out[i] = acc;
    }
    return out;
}

/// A^T * v without forming the transpose.
inline Vector matvec_transposed(const Matrix& a, const Vector& v) {
    if (a.rows() != v.size())
        throw std::invalid_argument("matvec_transposed: dimension mismatch");
    Vector out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        for (std::size_t k = 0; k < a.cols(); ++k) out[k] += a(i, k) * vi;
    }
    return out;
}

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

inline double norm_inf(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline Vector operator+(Vector a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("vector +: length mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vector operator-(Vector a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("vector -: length mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

inline Vector operator*(double s, Vector a) {
    for (double& x : a) x *= s;
    return a;
}

/// a += s * b
inline void axpy(double s, const Vector& b, Vector& a) {
    if (a.size() != b.size()) throw std::invalid_argument("axpy: length mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

inline double frobenius_norm(const Matrix& a) {
    double acc = 0.0;
    for (double x : a.storage()) acc += x * x;
    return std::sqrt(acc);
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.storage()) m = std::max(m, std::abs(x));
    return m;
}

inline double trace(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("trace: non-square");
    double t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
    return t;
}

/// v^T A v
inline double quadratic_form(const Vector& v, const Matrix& a) {
    return dot(v, matvec(a, v));
}

/// (A + A^T) / 2
inline Matrix symmetrize(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("symmetrize: non-square");
    Matrix s(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
    return s;
}

inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-12) {
    if (a.rows() != a.cols()) return false;
    double diff = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            const double d = a(i, j) - a(j, i);
            diff += 2.0 * d * d;
        }
    const double scale = frobenius_norm(a);
    return std::sqrt(diff) <= rel_tol * std::max(scale, 1.0);
}

inline bool all_finite(const Matrix& a) {
    for (double x : a.storage())
        if (!std::isfinite(x)) return false;
    return true;
}

/// Rank-one update A + u v^T.
inline Matrix add_outer(Matrix a, const Vector& u, const Vector& v) {
    if (a.rows() != u.size() || a.cols() != v.size())
        throw std::invalid_argument("add_outer: dimension mismatch");
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) a(i, j) += u[i] * v[j];
    return a;
}

}  // namespace multiverse
