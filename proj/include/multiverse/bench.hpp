#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "multiverse/config.hpp"
#include "multiverse/io.hpp"
#include "multiverse/joint_bayesian.hpp"
#include "multiverse/network.hpp"
#include "multiverse/report.hpp"
#include "multiverse/scatter.hpp"

namespace multiverse {

/// Everything one seeded training run contributes to the head-count
/// comparison: source-domain quality, cross-head diagnostics, target-domain
/// spectra and verification accuracy.
struct RunMetrics {
    std::size_t heads = 0;
    std::uint64_t seed = 0;
    double objective = 0.0;
    double val_error = 0.0;
    double ortho_violation = 0.0;
    double prob_agreement = 0.0;
    std::size_t effective_rank = 0;
    std::size_t below_tau = 0;
    double fisher_l1 = 0.0;
    double cosine_accuracy = 0.0;
    double jb_accuracy = 0.0;
    Vector gram_values;
    Vector fisher_values;
};

/// One full transfer experiment: generate, split, train m heads, embed the
/// target domain, measure spectra and same/not-same accuracy. All stage
/// seeds derive from `seed`, so a run is one number away from reproducible.
inline RunMetrics run_experiment(const ExperimentConfig& cfg, std::size_t heads,
                                 std::uint64_t seed) {
    const LabeledDataset ds =
        gen_gaussian_mixture(cfg.classes, cfg.input_dim, cfg.per_class, cfg.center_scale,
                             cfg.noise_scale, derive_seed(seed, 10));
    const TransferSplit split =
        split_transfer(ds, cfg.source_classes, cfg.val_fraction, derive_seed(seed, 11));

    TrainConfig train_cfg = cfg.train;
    train_cfg.heads = heads;
    train_cfg.seed = derive_seed(seed, 12);
    const TrainResult result = train(split.source_train, split.source_val, train_cfg);

    RunMetrics metrics;
    metrics.heads = heads;
    metrics.seed = seed;
    metrics.objective = result.report.objective.back();
    metrics.val_error = result.report.val_error.back();
    metrics.ortho_violation = result.report.ortho_violation.back();
    metrics.prob_agreement = result.report.prob_agreement.back();

    // Target-domain spectra.
    const Matrix target_repr = forward_repr(result.net, split.target.features);
    const GramSpectrum gram = gram_spectrum(target_repr);
    metrics.gram_values = gram.eig.values;
    metrics.effective_rank = gram.effective_rank;
    metrics.below_tau = gram.eig.values.size() - gram.effective_rank;
    const ScatterStats target_stats =
        compute_scatter(target_repr, split.target.labels, split.target.class_count);
    const FisherSpectrum fisher = fisher_spectrum(target_stats);
    metrics.fisher_values = fisher.values;
    metrics.fisher_l1 = fisher.l1_norm;

    // Verification: JB fitted on the source validation embedding, decision
    // threshold calibrated there, accuracy measured on target pairs.
    LabeledDataset val_embedded = split.source_val;
    val_embedded.features = forward_repr(result.net, split.source_val.features);
    LabeledDataset target_embedded = split.target;
    target_embedded.features = target_repr;

    const auto val_counts = class_counts(val_embedded);
    std::size_t avail_same = 0;
    for (std::size_t n : val_counts) avail_same += n * (n - 1) / 2;
    const std::size_t val_n = val_embedded.size();
    const std::size_t avail_diff = val_n * (val_n - 1) / 2 - avail_same;
    const PairSet calib_pairs =
        sample_pairs(val_embedded, std::min(cfg.pairs_same, avail_same),
                     std::min(cfg.pairs_diff, avail_diff), derive_seed(seed, 14));
    const PairSet eval_pairs =
        sample_pairs(target_embedded, cfg.pairs_same, cfg.pairs_diff, derive_seed(seed, 13));

    const JBModel jb = jb_fit(val_embedded);
    const PairScorer jb_scorer = [&jb](const Vector& a, const Vector& b) {
        return jb_score(jb, a, b);
    };
    metrics.jb_accuracy =
        evaluate_pairs(jb_scorer, target_embedded, eval_pairs, val_embedded, calib_pairs)
            .accuracy;
    metrics.cosine_accuracy =
        evaluate_pairs([](const Vector& a, const Vector& b) { return cosine_score(a, b); },
                       target_embedded, eval_pairs, val_embedded, calib_pairs)
            .accuracy;
    return metrics;
}

struct BenchResult {
    std::vector<RunMetrics> runs;  // ordered by (head count, seed)
};

/// Fan the seeded runs out across worker threads. Each run is fully
/// isolated and lands in its preassigned slot, so the output does not
/// depend on scheduling.
inline BenchResult run_bench(const ExperimentConfig& cfg) {
    std::vector<std::pair<std::size_t, std::uint64_t>> jobs;
    for (std::size_t m : cfg.bench_heads)
        for (std::uint64_t s : cfg.bench_seeds) jobs.emplace_back(m, s);

    BenchResult result;
    result.runs.resize(jobs.size());
    std::atomic<std::size_t> next{0};
    const std::size_t worker_count = std::min<std::size_t>(cfg.bench_threads, jobs.size());
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> failures(worker_count);
    for (std::size_t w = 0; w < worker_count; ++w) {
        workers.emplace_back([&, w] {
            try {
                while (true) {
                    const std::size_t at = next.fetch_add(1);
                    if (at >= jobs.size()) return;
                    result.runs[at] = run_experiment(cfg, jobs[at].first, jobs[at].second);
                }
            } catch (...) {
                failures[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (const auto& failure : failures)
        if (failure) std::rethrow_exception(failure);
    return result;
}

inline double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Per-head-count medians over the seeds.
struct BenchMedians {
    std::size_t heads = 0;
    double val_error = 0.0;
    double ortho_violation = 0.0;
    double prob_agreement = 0.0;
    double effective_rank = 0.0;
    double below_tau = 0.0;
    double fisher_l1 = 0.0;
    double cosine_accuracy = 0.0;
    double jb_accuracy = 0.0;
};

inline std::vector<BenchMedians> bench_medians(const ExperimentConfig& cfg,
                                               const BenchResult& result) {
    std::vector<BenchMedians> out;
    for (std::size_t m : cfg.bench_heads) {
        std::vector<double> val, viol, agree, rank, below, fisher, cosine, jb;
        for (const RunMetrics& run : result.runs) {
            if (run.heads != m) continue;
            val.push_back(run.val_error);
            viol.push_back(run.ortho_violation);
            agree.push_back(run.prob_agreement);
            rank.push_back(static_cast<double>(run.effective_rank));
            below.push_back(static_cast<double>(run.below_tau));
            fisher.push_back(run.fisher_l1);
            cosine.push_back(run.cosine_accuracy);
            jb.push_back(run.jb_accuracy);
        }
        BenchMedians med;
        med.heads = m;
        med.val_error = median(val);
        med.ortho_violation = median(viol);
        med.prob_agreement = median(agree);
        med.effective_rank = median(rank);
        med.below_tau = median(below);
        med.fisher_l1 = median(fisher);
        med.cosine_accuracy = median(cosine);
        med.jb_accuracy = median(jb);
        out.push_back(med);
    }
    return out;
}

inline std::string bench_runs_csv(const BenchResult& result) {
    std::ostringstream out;
    out << "heads,seed,objective,val_error,ortho_violation,prob_agreement,"
           "effective_rank,below_tau,fisher_l1,cosine_accuracy,jb_accuracy\n";
    for (const RunMetrics& run : result.runs) {
        out << run.heads << ',' << run.seed << ',' << format_real(run.objective) << ','
            << format_real(run.val_error) << ',' << format_real(run.ortho_violation) << ','
            << format_real(run.prob_agreement) << ',' << run.effective_rank << ','
            << run.below_tau << ',' << format_real(run.fisher_l1) << ','
            << format_real(run.cosine_accuracy) << ',' << format_real(run.jb_accuracy) << '\n';
    }
    return out.str();
}

inline std::string bench_medians_csv(const std::vector<BenchMedians>& medians) {
    std::ostringstream out;
    out << "heads,val_error,ortho_violation,prob_agreement,effective_rank,below_tau,"
           "fisher_l1,cosine_accuracy,jb_accuracy\n";
    for (const BenchMedians& med : medians) {
        out << med.heads << ',' << format_real(med.val_error) << ','
            << format_real(med.ortho_violation) << ',' << format_real(med.prob_agreement) << ','
            << format_real(med.effective_rank) << ',' << format_real(med.below_tau) << ','
            << format_real(med.fisher_l1) << ',' << format_real(med.cosine_accuracy) << ','
            << format_real(med.jb_accuracy) << '\n';
    }
    return out.str();
}

/// Bench artifacts: per-run rows, per-head medians, and the overlay spectra
/// of the first bench seed.
inline void write_bench_artifacts(const ExperimentConfig& cfg, const BenchResult& result,
                                  const std::filesystem::path& dir) {
    write_text_atomic(dir / "runs.csv", bench_runs_csv(result));
    write_text_atomic(dir / "medians.csv", bench_medians_csv(bench_medians(cfg, result)));

    std::vector<SpectrumReport> overlays;
    for (const RunMetrics& run : result.runs) {
        if (run.seed != cfg.bench_seeds.front()) continue;
        SpectrumReport report;
        report.name = "M" + std::to_string(run.heads);
        report.gram_values = run.gram_values;
        report.fisher_values = run.fisher_values;
        report.effective_rank = run.effective_rank;
        report.fisher_l1 = run.fisher_l1;
        overlays.push_back(std::move(report));
    }
    emit_spectrum_files(overlays, SpectrumPanel::Gram, dir / "spectrum_gram.csv",
                        dir / "spectrum_gram.svg");
    emit_spectrum_files(overlays, SpectrumPanel::Fisher, dir / "spectrum_fisher.csv",
                        dir / "spectrum_fisher.svg");
}

}  // namespace multiverse
