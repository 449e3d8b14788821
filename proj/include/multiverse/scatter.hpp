#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "multiverse/dataset.hpp"
#include "multiverse/eigen.hpp"
#include "multiverse/matrix.hpp"

namespace multiverse {

/// Global/class means with the within- and between-class scatter matrices,
/// both normalized by the total sample count so that
/// within + between = total scatter.
struct ScatterStats {
    Vector global_mean;
    Matrix class_means;  // d x c, one column per class
    std::vector<std::size_t> counts;
    Matrix within;
    Matrix between;

    std::size_t dim() const { return global_mean.size(); }
    std::size_t total() const {
        std::size_t n = 0;
        for (std::size_t c : counts) n += c;
        return n;
    }
};

inline ScatterStats compute_scatter(const Matrix& features, const std::vector<int>& labels,
                                    int class_count) {
    if (features.cols() != labels.size())
        throw std::invalid_argument("compute_scatter: label count differs from sample count");
    if (class_count <= 0 || features.cols() == 0)
        throw std::invalid_argument("compute_scatter: empty input");

    const std::size_t d = features.rows();
    const std::size_t n = features.cols();
    const std::size_t c = static_cast<std::size_t>(class_count);

    ScatterStats stats;
    stats.counts.assign(c, 0);
    stats.class_means = Matrix(d, c);
    stats.global_mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= class_count)
            throw std::invalid_argument("compute_scatter: label out of range");
        ++stats.counts[static_cast<std::size_t>(y)];
        for (std::size_t k = 0; k < d; ++k) {
            stats.class_means(k, static_cast<std::size_t>(y)) += features(k, i);
            stats.global_mean[k] += features(k, i);
        }
    }
    for (std::size_t j = 0; j < c; ++j) {
        if (stats.counts[j] == 0)
            throw std::invalid_argument("compute_scatter: class " + std::to_string(j) +
                                        " has no samples");
        for (std::size_t k = 0; k < d; ++k)
            stats.class_means(k, j) /= static_cast<double>(stats.counts[j]);
    }
    for (std::size_t k = 0; k < d; ++k) stats.global_mean[k] /= static_cast<double>(n);

    Matrix within(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        Vector centered(d);
        for (std::size_t k = 0; k < d; ++k) centered[k] = features(k, i) - stats.class_means(k, y);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b) within(a, b) += centered[a] * centered[b];
    }
    Matrix between(d, d);
    for (std::size_t j = 0; j < c; ++j) {
        Vector centered(d);
        for (std::size_t k = 0; k < d; ++k)
            centered[k] = stats.class_means(k, j) - stats.global_mean[k];
        const double w = static_cast<double>(stats.counts[j]);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b) between(a, b) += w * centered[a] * centered[b];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            within(a, b) *= inv_n;
            within(b, a) = within(a, b);
            between(a, b) *= inv_n;
            between(b, a) = between(a, b);
        }
    stats.within = symmetrize(within);
    stats.between = symmetrize(between);
    return stats;
}

inline ScatterStats compute_scatter(const LabeledDataset& ds) {
    return compute_scatter(ds.features, ds.labels, ds.class_count);
}

/// Discriminativeness of a direction: v^T S_b v / v^T (S_w + eps I) v.
/// The default eps is the scale-aware jitter of S_w; batch-estimated scatter
/// is often singular, so the denominator is always regularized.
inline double fisher_ratio(const Vector& v, const ScatterStats& stats, double epsilon) {
    if (v.size() != stats.dim()) throw std::invalid_argument("fisher_ratio: dimension mismatch");
    if (norm2(v) == 0.0) throw std::invalid_argument("fisher_ratio: zero vector");
    const double numerator = quadratic_form(v, stats.between);
    const double denominator = quadratic_form(v, stats.within) + epsilon * dot(v, v);
    if (denominator <= 0.0)
        throw std::invalid_argument("fisher_ratio: non-positive within-class energy");
    return numerator / denominator;
}

inline double fisher_ratio(const Vector& v, const ScatterStats& stats) {
    return fisher_ratio(v, stats, default_jitter(stats.within));
}

/// Unregularized ratio v^T S_b v / v^T S_w v, for exact theorem checks on
/// positive-definite scatter.
inline double fisher_ratio_exact(const Vector& v, const Matrix& between, const Matrix& within) {
    const double denominator = quadratic_form(v, within);
    if (denominator <= 0.0)
        throw std::invalid_argument("fisher_ratio_exact: non-positive within-class energy");
    return quadratic_form(v, between) / denominator;
}

/// Generalized eigenvalues of (S_b, S_w), descending, with their L1 norm.
struct FisherSpectrum {
    Vector values;
    Matrix vectors;
    double l1_norm = 0.0;
};

inline FisherSpectrum fisher_spectrum(const ScatterStats& stats, double epsilon) {
    const GeneralizedEigenDecomposition gen = gen_sym_eig(stats.between, stats.within, epsilon);
    FisherSpectrum out;
    out.values = gen.values;
    out.vectors = gen.vectors;
    for (double g : gen.values) out.l1_norm += g;
    return out;
}

inline FisherSpectrum fisher_spectrum(const ScatterStats& stats) {
    return fisher_spectrum(stats, default_jitter(stats.within));
}

}  // namespace multiverse
