#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "multiverse/errors.hpp"
#include "multiverse/network.hpp"

namespace multiverse {

/// Experiment description, loaded from a strict JSON document: unknown keys
/// are rejected at every level, ranges are validated before any work runs.
struct ExperimentConfig {
    // dataset
    int classes = 10;
    std::size_t input_dim = 32;
    std::size_t per_class = 200;
    double center_scale = 0.5;
    double noise_scale = 1.0;
    // split
    int source_classes = 8;
    double val_fraction = 0.1;
    // training
    TrainConfig train;
    // pair evaluation
    std::size_t pairs_same = 3000;
    std::size_t pairs_diff = 3000;
    // bench sweep
    std::vector<std::size_t> bench_heads{1, 3, 5};
    std::vector<std::uint64_t> bench_seeds{1, 2, 3, 4, 5};
    std::size_t bench_threads = 2;

    std::uint64_t seed = 1;
    std::string out = "runs/default";
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& node, const std::set<std::string>& allowed,
                           const std::string& where) {
    for (const auto& [key, _] : node.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
inline void read_field(const json& node, const char* key, T& into) {
    if (!node.contains(key)) return;
    try {
        into = node.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
    }
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
    using detail::read_field;
    using detail::reject_unknown;
    if (!doc.is_object()) throw ConfigError("config: document must be a JSON object");
    reject_unknown(doc, {"dataset", "split", "train", "pairs", "bench", "seed", "out"},
                   "the top level");

    ExperimentConfig cfg;
    read_field(doc, "seed", cfg.seed);
    read_field(doc, "out", cfg.out);

    if (doc.contains("dataset")) {
        const auto& node = doc.at("dataset");
        reject_unknown(node, {"classes", "input_dim", "per_class", "center_scale", "noise_scale"},
                       "dataset");
        read_field(node, "classes", cfg.classes);
        read_field(node, "input_dim", cfg.input_dim);
        read_field(node, "per_class", cfg.per_class);
        read_field(node, "center_scale", cfg.center_scale);
        read_field(node, "noise_scale", cfg.noise_scale);
    }
    if (doc.contains("split")) {
        const auto& node = doc.at("split");
        reject_unknown(node, {"source_classes", "val_fraction"}, "split");
        read_field(node, "source_classes", cfg.source_classes);
        read_field(node, "val_fraction", cfg.val_fraction);
    }
    if (doc.contains("train")) {
        const auto& node = doc.at("train");
        reject_unknown(node,
                       {"heads", "ortho", "lambda", "weight_decay", "batch_size",
                        "learning_rate", "momentum", "epochs", "hidden_dim", "repr_dim"},
                       "train");
        long long heads = static_cast<long long>(cfg.train.heads);
        read_field(node, "heads", heads);
        if (heads < 1) throw ConfigError("config: train.heads must be >= 1");
        cfg.train.heads = static_cast<std::size_t>(heads);
        std::string ortho = "plain";
        read_field(node, "ortho", ortho);
        if (ortho == "plain")
            cfg.train.ortho = OrthoKind::Plain;
        else if (ortho == "sw")
            cfg.train.ortho = OrthoKind::SwOrtho;
        else
            throw ConfigError("config: train.ortho must be 'plain' or 'sw'");
        read_field(node, "lambda", cfg.train.lambda);
        read_field(node, "weight_decay", cfg.train.weight_decay);
        read_field(node, "batch_size", cfg.train.batch_size);
        read_field(node, "learning_rate", cfg.train.learning_rate);
        read_field(node, "momentum", cfg.train.momentum);
        read_field(node, "epochs", cfg.train.epochs);
        read_field(node, "hidden_dim", cfg.train.hidden_dim);
        read_field(node, "repr_dim", cfg.train.repr_dim);
    }
    if (doc.contains("pairs")) {
        const auto& node = doc.at("pairs");
        reject_unknown(node, {"same", "diff"}, "pairs");
        read_field(node, "same", cfg.pairs_same);
        read_field(node, "diff", cfg.pairs_diff);
    }
    if (doc.contains("bench")) {
        const auto& node = doc.at("bench");
        reject_unknown(node, {"head_counts", "seeds", "threads"}, "bench");
        read_field(node, "head_counts", cfg.bench_heads);
        read_field(node, "seeds", cfg.bench_seeds);
        read_field(node, "threads", cfg.bench_threads);
    }

    if (cfg.classes < 2) throw ConfigError("config: dataset.classes must be >= 2");
    if (cfg.input_dim < 2) throw ConfigError("config: dataset.input_dim must be >= 2");
    if (cfg.per_class < 2) throw ConfigError("config: dataset.per_class must be >= 2");
    if (cfg.source_classes < 1 || cfg.source_classes >= cfg.classes)
        throw ConfigError("config: split.source_classes must be in [1, classes)");
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0))
        throw ConfigError("config: split.val_fraction must be in (0, 1)");
    if (cfg.pairs_same == 0 || cfg.pairs_diff == 0)
        throw ConfigError("config: pairs.same and pairs.diff must be positive");
    if (cfg.bench_heads.empty() || cfg.bench_seeds.empty())
        throw ConfigError("config: bench sweep must name at least one head count and seed");
    if (cfg.bench_threads < 1) throw ConfigError("config: bench.threads must be >= 1");
    for (std::size_t m : cfg.bench_heads)
        if (m < 1 || m > cfg.train.repr_dim)
            throw ConfigError("config: bench head counts must be in [1, repr_dim]");
    validate_train_config(cfg.train);
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path.string() + ": " + e.what());
    }
    return parse_experiment_config(doc);
}

}  // namespace multiverse
