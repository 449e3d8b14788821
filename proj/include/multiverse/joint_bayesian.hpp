#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "multiverse/dataset.hpp"
#include "multiverse/eigen.hpp"
#include "multiverse/matrix.hpp"
#include "multiverse/scatter.hpp"

namespace multiverse {

/// Two-Gaussian-factor verification model. A sample is class identity plus
/// within-class noise; the same/different hypotheses for a pair have the
/// 2d x 2d covariances
///   Sigma_same = [[S_b + S_w, S_b], [S_b, S_b + S_w]]
///   Sigma_diff = blockdiag(S_b + S_w, S_b + S_w)
/// kept here in factored form for scoring.
struct JBModel {
    Vector mean;
    Matrix between;
    Matrix within;
    Cholesky chol_same;
    Cholesky chol_diff;
    double logdet_same = 0.0;
    double logdet_diff = 0.0;

    std::size_t dim() const { return mean.size(); }
};

namespace detail {

inline Matrix assemble_same_covariance(const Matrix& between, const Matrix& within) {
    const std::size_t d = between.rows();
    Matrix sigma(2 * d, 2 * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double total = between(i, j) + within(i, j);
            sigma(i, j) = total;
            sigma(d + i, d + j) = total;
            sigma(i, d + j) = between(i, j);
            sigma(d + i, j) = between(i, j);
        }
    return sigma;
}

inline Matrix assemble_diff_covariance(const Matrix& between, const Matrix& within) {
    const std::size_t d = between.rows();
    Matrix sigma(2 * d, 2 * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double total = between(i, j) + within(i, j);
            sigma(i, j) = total;
            sigma(d + i, d + j) = total;
        }
    return sigma;
}

}  // namespace detail

/// Assemble and factor the hypothesis covariances from given scatter
/// estimates. The jitter is added to both 2d x 2d matrices before
/// factorization.
inline JBModel jb_from_scatter(Vector mean, Matrix between, Matrix within, double jitter) {
    if (between.rows() != mean.size() || within.rows() != mean.size() ||
        between.rows() != between.cols() || within.rows() != within.cols())
        throw std::invalid_argument("jb_from_scatter: inconsistent dimensions");
    const Matrix sigma_same = detail::assemble_same_covariance(between, within);
    const Matrix sigma_diff = detail::assemble_diff_covariance(between, within);
    JBModel model{std::move(mean),
                  std::move(between),
                  std::move(within),
                  Cholesky(sigma_same, jitter),
                  Cholesky(sigma_diff, jitter),
                  0.0,
                  0.0};
    model.logdet_same = model.chol_same.log_det();
    model.logdet_diff = model.chol_diff.log_det();
    return model;
}

/// Fit from labeled data: scatter estimation then covariance assembly.
/// Pass a negative jitter to use the scale-aware default.
inline JBModel jb_fit(const Matrix& features, const std::vector<int>& labels, int class_count,
                      double jitter = -1.0) {
    if (class_count < 2) throw std::invalid_argument("jb_fit: need at least two classes");
    const ScatterStats stats = compute_scatter(features, labels, class_count);
    if (jitter < 0.0) {
        Matrix total = stats.between;
        total += stats.within;
        jitter = default_jitter(total);
        if (jitter <= 0.0) jitter = 1e-12;
    }
    return jb_from_scatter(stats.global_mean, stats.between, stats.within, jitter);
}

inline JBModel jb_fit(const LabeledDataset& ds, double jitter = -1.0) {
    return jb_fit(ds.features, ds.labels, ds.class_count, jitter);
}

/// Log-likelihood ratio of the same/different hypotheses for a pair,
/// including the log-determinant terms, so the score is a true LLR:
///   (-1/2 q_same - 1/2 logdet_same) - (-1/2 q_diff - 1/2 logdet_diff).
/// Higher means more likely same. The quadratic forms go through the
/// triangular factors, never an explicit inverse.
inline double jb_score(const JBModel& model, const Vector& x1, const Vector& x2) {
    const std::size_t d = model.dim();
    if (x1.size() != d || x2.size() != d)
        throw std::invalid_argument("jb_score: dimension mismatch");
    Vector stacked(2 * d);
    for (std::size_t k = 0; k < d; ++k) {
        stacked[k] = x1[k] - model.mean[k];
        stacked[d + k] = x2[k] - model.mean[k];
    }
    const Vector z_same = model.chol_same.solve_lower(stacked);
    const Vector z_diff = model.chol_diff.solve_lower(stacked);
    const double q_same = dot(z_same, z_same);
    const double q_diff = dot(z_diff, z_diff);
    return 0.5 * (q_diff - q_same) + 0.5 * (model.logdet_diff - model.logdet_same);
}

/// Re-centered copy, for scoring a domain by its own mean instead of the
/// fitted one.
inline JBModel jb_recenter(const JBModel& model, Vector new_mean) {
    if (new_mean.size() != model.dim())
        throw std::invalid_argument("jb_recenter: dimension mismatch");
    JBModel out = model;
    out.mean = std::move(new_mean);
    return out;
}

inline double cosine_score(const Vector& x1, const Vector& x2) {
    const double n1 = norm2(x1);
    const double n2 = norm2(x2);
    if (n1 == 0.0 || n2 == 0.0)
        throw std::invalid_argument("cosine_score: zero vector");
    return std::clamp(dot(x1, x2) / (n1 * n2), -1.0, 1.0);
}

using PairScorer = std::function<double(const Vector&, const Vector&)>;

/// Accuracy at a calibrated threshold over a pair set.
struct VerificationResult {
    double accuracy = 0.0;
    double threshold = 0.0;
    std::vector<double> scores;  // evaluation-pair scores, in pair order
};

namespace detail {

struct ScoredPair {
    double score;
    bool is_same;
};

/// Sweep candidate thresholds (below the range, midpoints of consecutive
/// distinct scores, above the range) and return the lowest one maximizing
/// accuracy under the rule "same iff score >= threshold".
inline double calibrate_threshold(std::vector<ScoredPair> scored) {
    std::sort(scored.begin(), scored.end(),
              [](const ScoredPair& a, const ScoredPair& b) { return a.score < b.score; });
    const std::size_t n = scored.size();

    std::vector<double> candidates;
    candidates.push_back(scored.front().score - 1.0);
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (scored[i].score < scored[i + 1].score)
            candidates.push_back(0.5 * (scored[i].score + scored[i + 1].score));
    candidates.push_back(scored.back().score + 1.0);

    std::size_t total_same = 0;
    for (const auto& sp : scored) total_same += sp.is_same ? 1 : 0;

    double best_threshold = candidates.front();
    std::size_t best_correct = 0;
    std::size_t below = 0;       // index of first score >= candidate
    std::size_t diff_below = 0;  // not-same pairs strictly below the candidate
    for (double t : candidates) {
        while (below < n && scored[below].score < t) {
            if (!scored[below].is_same) ++diff_below;
            ++below;
        }
        // same pairs at/above t are correct, plus different pairs below t
        const std::size_t same_below = below - diff_below;
        const std::size_t correct = (total_same - same_below) + diff_below;
        if (correct > best_correct) {
            best_correct = correct;
            best_threshold = t;
        }
    }
    return best_threshold;
}

}  // namespace detail

/// Calibrate the decision threshold on one pair set and report accuracy on
/// another. The calibration set should be disjoint from the evaluation set;
/// in the transfer protocol it comes from the source validation split.
inline VerificationResult evaluate_pairs(const PairScorer& scorer, const LabeledDataset& eval_ds,
                                         const PairSet& eval_pairs,
                                         const LabeledDataset& calib_ds,
                                         const PairSet& calib_pairs) {
    if (eval_pairs.size() == 0 || calib_pairs.size() == 0)
        throw std::invalid_argument("evaluate_pairs: empty pair set");

    std::vector<detail::ScoredPair> calib;
    calib.reserve(calib_pairs.size());
    for (const Pair& p : calib_pairs.pairs)
        calib.push_back({scorer(calib_ds.sample(p.a), calib_ds.sample(p.b)), p.is_same});
    const double threshold = detail::calibrate_threshold(std::move(calib));

    VerificationResult result;
    result.threshold = threshold;
    result.scores.reserve(eval_pairs.size());
    std::size_t correct = 0;
    for (const Pair& p : eval_pairs.pairs) {
        const double score = scorer(eval_ds.sample(p.a), eval_ds.sample(p.b));
        result.scores.push_back(score);
        const bool predicted_same = score >= threshold;
        if (predicted_same == p.is_same) ++correct;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(eval_pairs.size());
    return result;
}

/// Same-dataset variant: calibration pairs index the same dataset as the
/// evaluation pairs.
inline VerificationResult evaluate_pairs(const PairScorer& scorer, const LabeledDataset& ds,
                                         const PairSet& pairs, const PairSet& calibration) {
    return evaluate_pairs(scorer, ds, pairs, ds, calibration);
}

}  // namespace multiverse
