#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "multiverse/errors.hpp"
#include "multiverse/matrix.hpp"
#include "multiverse/rng.hpp"

namespace multiverse {

/// Feature matrix (one column per sample) plus dense integer labels in
/// [0, class_count). `original_labels[k]` records which external label the
/// dense id k was remapped from.
struct LabeledDataset {
    Matrix features;
    std::vector<int> labels;
    int class_count = 0;
    std::vector<long long> original_labels;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.rows(); }
    Vector sample(std::size_t i) const { return features.col(i); }
};

inline void validate_dataset(const LabeledDataset& ds) {
    if (ds.class_count <= 0) throw std::invalid_argument("dataset: class_count must be > 0");
    if (ds.features.cols() != ds.labels.size())
        throw std::invalid_argument("dataset: label count differs from sample count");
    std::vector<std::size_t> counts(static_cast<std::size_t>(ds.class_count), 0);
    for (int y : ds.labels) {
        if (y < 0 || y >= ds.class_count)
            throw std::invalid_argument("dataset: label out of range");
        ++counts[static_cast<std::size_t>(y)];
    }
    for (std::size_t j = 0; j < counts.size(); ++j)
        if (counts[j] == 0)
            throw std::invalid_argument("dataset: class " + std::to_string(j) +
                                        " has no samples");
    if (!all_finite(ds.features))
        throw std::invalid_argument("dataset: non-finite feature value");
}

inline std::vector<std::size_t> class_counts(const LabeledDataset& ds) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(ds.class_count), 0);
    for (int y : ds.labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

/// Isotropic Gaussian mixture: class centers drawn from
/// center_scale * N(0, I), samples from center + noise_scale * N(0, I).
/// Draw order is fixed (all centers first, then samples class by class), so
/// a seed pins the dataset bit-for-bit.
inline LabeledDataset gen_gaussian_mixture(int class_count, std::size_t input_dim,
                                           std::size_t per_class, double center_scale,
                                           double noise_scale, std::uint64_t seed) {
    if (class_count < 2) throw std::invalid_argument("gen_gaussian_mixture: need >= 2 classes");
    if (input_dim < 2) throw std::invalid_argument("gen_gaussian_mixture: need input_dim >= 2");
    if (per_class < 1) throw std::invalid_argument("gen_gaussian_mixture: need per_class >= 1");

    Rng rng(seed);
    const std::size_t c = static_cast<std::size_t>(class_count);
    Matrix centers(input_dim, c);
    for (std::size_t j = 0; j < c; ++j)
        for (std::size_t k = 0; k < input_dim; ++k) centers(k, j) = center_scale * rng.gaussian();

    LabeledDataset ds;
    ds.class_count = class_count;
    ds.features = Matrix(input_dim, c * per_class);
    ds.labels.reserve(c * per_class);
    std::size_t col = 0;
    for (std::size_t j = 0; j < c; ++j) {
        for (std::size_t s = 0; s < per_class; ++s, ++col) {
            for (std::size_t k = 0; k < input_dim; ++k)
                ds.features(k, col) = centers(k, j) + noise_scale * rng.gaussian();
            ds.labels.push_back(static_cast<int>(j));
        }
    }
    ds.original_labels.resize(c);
    for (std::size_t j = 0; j < c; ++j) ds.original_labels[j] = static_cast<long long>(j);
    return ds;
}

/// Extract the samples at `indices` (in the given order) and re-densify the
/// labels so the partition's classes run [0, c').
inline LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices) {
    std::map<int, int> remap;
    for (std::size_t i : indices) remap.emplace(ds.labels[i], 0);
    int next = 0;
    for (auto& [orig, dense] : remap) dense = next++;

    LabeledDataset out;
    out.class_count = next;
    out.features = Matrix(ds.dim(), indices.size());
    out.labels.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        out.features.set_col(k, ds.features.col(indices[k]));
        out.labels.push_back(remap.at(ds.labels[indices[k]]));
    }
    out.original_labels.resize(static_cast<std::size_t>(next));
    for (const auto& [orig, dense] : remap)
        out.original_labels[static_cast<std::size_t>(dense)] =
            ds.original_labels[static_cast<std::size_t>(orig)];
    return out;
}

/// Source/target transfer split. Classes [0, source_classes) are divided
/// per class into train/val; the remaining classes become the target set
/// untouched. Index lists refer to the input dataset and together form an
/// exact partition.
struct TransferSplit {
    LabeledDataset source_train;
    LabeledDataset source_val;
    LabeledDataset target;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> val_indices;
    std::vector<std::size_t> target_indices;
};

inline TransferSplit split_transfer(const LabeledDataset& ds, int source_classes,
                                    double val_fraction, std::uint64_t seed) {
    if (source_classes < 1 || source_classes >= ds.class_count)
        throw std::invalid_argument("split_transfer: need 1 <= source_classes < class_count");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("split_transfer: val_fraction must be in (0, 1)");

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.class_count));
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    Rng rng(seed);
    TransferSplit split;
    for (int j = 0; j < source_classes; ++j) {
        auto& members = by_class[static_cast<std::size_t>(j)];
        const std::size_t n_j = members.size();
        if (n_j < 2)
            throw DataError("split_transfer: source class " + std::to_string(j) +
                            " has fewer than 2 samples");
        // ceil(val_fraction * n_j), clamped to [1, n_j - 1]
        std::size_t val_count =
            static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(n_j)));
        val_count = std::min(std::max<std::size_t>(val_count, 1), n_j - 1);
        rng.shuffle(members);
        std::vector<std::size_t> val(members.begin(), members.begin() + val_count);
        std::vector<std::size_t> train(members.begin() + val_count, members.end());
        split.val_indices.insert(split.val_indices.end(), val.begin(), val.end());
        split.train_indices.insert(split.train_indices.end(), train.begin(), train.end());
    }
    for (int j = source_classes; j < ds.class_count; ++j) {
        const auto& members = by_class[static_cast<std::size_t>(j)];
        split.target_indices.insert(split.target_indices.end(), members.begin(), members.end());
    }
    std::sort(split.train_indices.begin(), split.train_indices.end());
    std::sort(split.val_indices.begin(), split.val_indices.end());
    std::sort(split.target_indices.begin(), split.target_indices.end());

    split.source_train = subset(ds, split.train_indices);
    split.source_val = subset(ds, split.val_indices);
    split.target = subset(ds, split.target_indices);
    return split;
}

/// Unordered sample pair with its same-class flag.
struct Pair {
    std::size_t a = 0;
    std::size_t b = 0;
    bool is_same = false;
};

struct PairSet {
    std::vector<Pair> pairs;
    std::size_t size() const { return pairs.size(); }
};

namespace detail {

inline std::size_t count_same_pairs(const std::vector<std::size_t>& counts) {
    std::size_t total = 0;
    for (std::size_t n : counts) total += n * (n - 1) / 2;
    return total;
}

}  // namespace detail

/// Uniform same/not-same pair sampling without replacement of unordered
/// index pairs. Falls back to full enumeration plus shuffle when the request
/// covers more than half of the eligible pairs, so sampling always
/// terminates; both paths are deterministic per seed.
inline PairSet sample_pairs(const LabeledDataset& ds, std::size_t n_same, std::size_t n_diff,
                            std::uint64_t seed) {
    const std::size_t n = ds.size();
    const auto counts = class_counts(ds);
    const std::size_t avail_same = detail::count_same_pairs(counts);
    const std::size_t avail_diff = n * (n - 1) / 2 - avail_same;
    if (n_same > avail_same)
        throw ExhaustionError("sample_pairs: requested " + std::to_string(n_same) +
                              " same-class pairs, only " + std::to_string(avail_same) +
                              " exist");
    if (n_diff > avail_diff)
        throw ExhaustionError("sample_pairs: requested " + std::to_string(n_diff) +
                              " different-class pairs, only " + std::to_string(avail_diff) +
                              " exist");

    Rng rng(seed);
    PairSet out;
    out.pairs.reserve(n_same + n_diff);

    auto draw = [&](bool want_same, std::size_t want, std::size_t avail) {
        if (want == 0) return;
        if (want * 2 > avail) {
            // Dense request: enumerate every eligible pair and shuffle.
            std::vector<std::pair<std::size_t, std::size_t>> all;
            all.reserve(avail);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j)
                    if ((ds.labels[i] == ds.labels[j]) == want_same) all.emplace_back(i, j);
            rng.shuffle(all);
            for (std::size_t k = 0; k < want; ++k)
                out.pairs.push_back({all[k].first, all[k].second, want_same});
            return;
        }
        std::set<std::pair<std::size_t, std::size_t>> seen;
        while (seen.size() < want) {
            const std::size_t i = rng.below(n);
            const std::size_t j = rng.below(n);
            if (i == j) continue;
            if ((ds.labels[i] == ds.labels[j]) != want_same) continue;
            const auto key = std::minmax(i, j);
            if (!seen.insert({key.first, key.second}).second) continue;
            out.pairs.push_back({key.first, key.second, want_same});
        }
    };

    draw(true, n_same, avail_same);
    draw(false, n_diff, avail_diff);
    return out;
}

}  // namespace multiverse
