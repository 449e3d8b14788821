#include <catch2/catch_amalgamated.hpp>

#include "multiverse/scatter.hpp"
#include "support/oracles.hpp"

using namespace multiverse;

TEST_CASE("scatter hand-computed two-class cross") {
    Matrix d(2, 4);
    d(0, 0) = 1.0;
    d(0, 1) = -1.0;
    d(1, 2) = 1.0;
    d(1, 3) = -1.0;
    const std::vector<int> y{0, 0, 1, 1};
    const ScatterStats stats = compute_scatter(d, y, 2);

    REQUIRE(norm2(stats.global_mean) == 0.0);
    REQUIRE(max_abs(stats.class_means) == 0.0);
    REQUIRE(frobenius_norm(stats.between) == 0.0);
    REQUIRE(stats.within(0, 0) == Catch::Approx(0.5));
    REQUIRE(stats.within(1, 1) == Catch::Approx(0.5));
    REQUIRE(stats.within(0, 1) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("scatter degenerate cases") {
    // One point per class: no within-class variation.
    Matrix d(2, 3);
    d(0, 0) = 1.0;
    d(0, 1) = 2.0;
    d(1, 2) = -1.0;
    const ScatterStats single = compute_scatter(d, {0, 1, 2}, 3);
    REQUIRE(frobenius_norm(single.within) == 0.0);

    // All samples identical: both scatters vanish.
    Matrix same(2, 4, 3.0);
    const ScatterStats flat = compute_scatter(same, {0, 0, 1, 1}, 2);
    REQUIRE(frobenius_norm(flat.within) == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(frobenius_norm(flat.between) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("scatter rejects an empty class by name") {
    Matrix d(2, 2);
    try {
        compute_scatter(d, {0, 2}, 3);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        REQUIRE(std::string(e.what()).find("class 1") != std::string::npos);
    }
}

TEST_CASE("within plus between equals total scatter") {
    Rng rng(31);
    const oracles::ToyProblem toy = oracles::overlapping_classes(5, 4, 20, rng);
    const ScatterStats stats = compute_scatter(toy.features, toy.labels, 4);

    const std::size_t n = toy.features.cols();
    Matrix total(5, 5);
    for (std::size_t i = 0; i < n; ++i) {
        Vector centered = toy.features.col(i);
        centered = centered - stats.global_mean;
        total = add_outer(std::move(total), centered, centered);
    }
    total *= 1.0 / static_cast<double>(n);

    Matrix sum = stats.within;
    sum += stats.between;
    sum -= total;
    REQUIRE(frobenius_norm(sum) <= 1e-10 * frobenius_norm(total));

    // PSD floor on both matrices.
    for (double v : sym_eig(stats.within).values)
        REQUIRE(v >= -1e-10 * frobenius_norm(stats.within));
    for (double v : sym_eig(stats.between).values)
        REQUIRE(v >= -1e-10 * std::max(frobenius_norm(stats.between), 1.0));
}

TEST_CASE("fisher ratio basics") {
    ScatterStats stats;
    stats.global_mean.assign(3, 0.0);
    stats.class_means = Matrix(3, 2);
    stats.counts = {1, 1};
    stats.within = Matrix::identity(3);
    stats.between = Matrix::identity(3);

    const Vector v{0.3, -2.0, 1.0};
    REQUIRE(fisher_ratio(v, stats) == Catch::Approx(1.0).margin(1e-5));
    REQUIRE_THROWS_AS(fisher_ratio(Vector{0.0, 0.0, 0.0}, stats), std::invalid_argument);
}

TEST_CASE("fisher ratio matches a direct quadratic-form oracle") {
    Rng rng(37);
    for (int rep = 0; rep < 5; ++rep) {
        ScatterStats stats;
        stats.global_mean.assign(4, 0.0);
        stats.within = oracles::random_spd(4, rng);
        stats.between = oracles::random_spd(4, rng);
        Vector v(4);
        for (double& x : v) x = rng.gaussian();

        const double eps = default_jitter(stats.within);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                num += v[i] * stats.between(i, j) * v[j];
                den += v[i] * stats.within(i, j) * v[j];
            }
        den += eps * dot(v, v);
        REQUIRE(fisher_ratio(v, stats) == Catch::Approx(num / den).epsilon(1e-12));
    }
}

TEST_CASE("fisher spectrum of proportional scatters") {
    Rng rng(41);
    ScatterStats stats;
    stats.within = oracles::random_spd(4, rng);
    stats.between = stats.within;
    stats.between *= 2.0;
    stats.global_mean.assign(4, 0.0);

    const FisherSpectrum spec = fisher_spectrum(stats);
    for (double g : spec.values) REQUIRE(g == Catch::Approx(2.0).margin(1e-5));

    stats.between = Matrix(4, 4);
    const FisherSpectrum zero = fisher_spectrum(stats);
    for (double g : zero.values) REQUIRE(g == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(zero.l1_norm == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("top generalized eigenvector attains gamma_1 and eigenpairs are self-consistent") {
    Rng rng(43);
    ScatterStats stats;
    stats.within = oracles::random_spd(5, rng);
    stats.between = oracles::random_spd(5, rng);
    stats.global_mean.assign(5, 0.0);

    const FisherSpectrum spec = fisher_spectrum(stats);
    for (std::size_t k = 0; k < 5; ++k) {
        const double ratio = fisher_ratio(spec.vectors.col(k), stats);
        REQUIRE(ratio == Catch::Approx(spec.values[k]).margin(1e-8));
    }
}

TEST_CASE("gamma_1 dominates random-direction fisher ratios") {
    Rng rng(47);
    ScatterStats stats;
    stats.within = oracles::random_spd(4, rng);
    stats.between = oracles::random_spd(4, rng);
    stats.global_mean.assign(4, 0.0);
    const FisherSpectrum spec = fisher_spectrum(stats);

    double best = 0.0;
    for (int rep = 0; rep < 10000; ++rep) {
        Vector v(4);
        for (double& x : v) x = rng.gaussian();
        best = std::max(best, fisher_ratio(v, stats));
    }
    REQUIRE(best <= spec.values[0] + 1e-8);
}

TEST_CASE("fisher spectrum is invariant under well-conditioned re-basing") {
    Rng rng(53);
    const oracles::ToyProblem toy = oracles::overlapping_classes(4, 5, 30, rng);
    const ScatterStats base = compute_scatter(toy.features, toy.labels, 5);
    // The exact pencil is basis-free; compare with the regularizer off, on
    // positive-definite within-class scatter.
    const FisherSpectrum reference = fisher_spectrum(base, 0.0);

    for (int rep = 0; rep < 5; ++rep) {
        // Random transform, re-drawn until its condition number is < 1e3.
        Matrix t;
        while (true) {
            t = oracles::random_gaussian(4, 4, rng);
            for (std::size_t i = 0; i < 4; ++i) t(i, i) += 1.5;
            const EigenDecomposition sv = sym_eig(symmetrize(matmul(transpose(t), t)));
            if (sv.values.back() > 0.0 &&
                std::sqrt(sv.values.front() / sv.values.back()) < 1e3)
                break;
        }
        const Matrix transformed = matmul(t, toy.features);
        const ScatterStats moved = compute_scatter(transformed, toy.labels, 5);
        const FisherSpectrum spec = fisher_spectrum(moved, 0.0);
        for (std::size_t k = 0; k < 4; ++k)
            REQUIRE(spec.values[k] ==
                    Catch::Approx(reference.values[k]).margin(1e-8 * (1.0 + reference.values[0])));
    }
}
