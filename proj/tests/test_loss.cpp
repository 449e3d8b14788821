#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "multiverse/loss.hpp"
#include "support/oracles.hpp"

using namespace multiverse;

namespace {

MultiverseHeads random_heads(std::size_t m, std::size_t d, std::size_t c, Rng& rng) {
    MultiverseHeads heads;
    for (std::size_t r = 0; r < m; ++r) {
        heads.weights.push_back(oracles::random_gaussian(d, c, rng));
        Vector b(c);
        for (double& x : b) x = 0.3 * rng.gaussian();
        heads.biases.push_back(std::move(b));
    }
    return heads;
}

std::vector<int> random_labels(std::size_t n, std::size_t c, Rng& rng) {
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(rng.below(c));
    return y;
}

/// Flatten all head parameters, evaluate the objective as a function of the
/// flat vector, for finite differencing.
struct FlatObjective {
    std::size_t m, d, c;
    Matrix batch;
    std::vector<int> labels;
    OrthoMode mode;
    PenaltyConfig cfg;

    std::size_t size() const { return m * (d * c + c); }

    MultiverseHeads unflatten(const Vector& params) const {
        MultiverseHeads heads;
        std::size_t at = 0;
        for (std::size_t r = 0; r < m; ++r) {
            Matrix f(d, c);
            for (double& x : f.storage()) x = params[at++];
            Vector b(c);
            for (double& x : b) x = params[at++];
            heads.weights.push_back(std::move(f));
            heads.biases.push_back(std::move(b));
        }
        return heads;
    }

    Vector flatten(const MultiverseHeads& heads) const {
        Vector params;
        params.reserve(size());
        for (std::size_t r = 0; r < m; ++r) {
            for (double x : heads.weights[r].storage()) params.push_back(x);
            for (double x : heads.biases[r]) params.push_back(x);
        }
        return params;
    }

    double operator()(const Vector& params) const {
        return multiverse_objective(unflatten(params), batch, labels, mode, cfg).value;
    }
};

}  // namespace

TEST_CASE("softmax closed forms") {
    const Matrix zero(3, 4);
    const Vector p = softmax_probs(zero, Vector(4, 0.0), Vector(3, 0.0));
    for (double x : p) REQUIRE(x == Catch::Approx(0.25).margin(1e-15));

    const Vector two_thirds =
        softmax_probs(Matrix(2, 2), Vector{std::log(2.0), 0.0}, Vector(2, 0.0));
    REQUIRE(two_thirds[0] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    REQUIRE(two_thirds[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax survives huge logits") {
    Matrix f(1, 2);
    f(0, 0) = 1000.0;
    const Vector p = softmax_probs(f, Vector(2, 0.0), Vector{1.0});
    REQUIRE(std::isfinite(p[0]));
    REQUIRE(p[0] == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(p[1] >= 0.0);
    REQUIRE(p[1] < 1e-300);
}

TEST_CASE("softmax columns sum to one") {
    Rng rng(61);
    const Matrix f = oracles::random_gaussian(4, 5, rng, 3.0);
    const Matrix batch = oracles::random_gaussian(4, 20, rng, 5.0);
    Vector b(5);
    for (double& x : b) x = rng.gaussian();
    const Matrix probs = softmax_batch(f, b, batch);
    for (std::size_t i = 0; i < 20; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            REQUIRE(probs(j, i) > 0.0);
            total += probs(j, i);
        }
        REQUIRE(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("cross entropy of the zero classifier is n log c") {
    Rng rng(67);
    const Matrix batch = oracles::random_gaussian(3, 17, rng);
    const std::vector<int> y = random_labels(17, 4, rng);
    const double loss = ce_loss(Matrix(3, 4), Vector(4, 0.0), batch, y);
    REQUIRE(loss == Catch::Approx(17.0 * std::log(4.0)).epsilon(1e-13));
}

TEST_CASE("cross entropy matches a scalar hand evaluation") {
    // One sample, two classes, logits fixed by hand: d = [2], f = [0.7, -0.4],
    // b = [0.1, 0.3]; z = (1.5, -0.5); loss = log(1 + e^-2) + 0 at y = 0.
    Matrix f(1, 2);
    f(0, 0) = 0.7;
    f(0, 1) = -0.4;
    const double loss = ce_loss(f, Vector{0.1, 0.3}, Matrix{{2.0}}, {0});
    const double hand = std::log(1.0 + std::exp(-2.0));
    REQUIRE(loss == Catch::Approx(hand).epsilon(1e-15));
}

TEST_CASE("cross entropy is shift invariant") {
    Rng rng(71);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix f = oracles::random_gaussian(4, 6, rng);
        Vector b(6);
        for (double& x : b) x = rng.gaussian();
        const Matrix batch = oracles::random_gaussian(4, 15, rng);
        const std::vector<int> y = random_labels(15, 6, rng);
        const double base = ce_loss(f, b, batch, y);

        Vector shift(4);
        for (double& x : shift) x = 2.0 * rng.gaussian();
        const double offset = rng.gaussian();
        Matrix f2 = f;
        for (std::size_t j = 0; j < 6; ++j)
            for (std::size_t k = 0; k < 4; ++k) f2(k, j) += shift[k];
        Vector b2 = b;
        for (double& x : b2) x += offset;

        const double shifted = ce_loss(f2, b2, batch, y);
        REQUIRE(std::abs(shifted - base) <= 1e-12 * (1.0 + std::abs(base)));
    }
}

TEST_CASE("gradient symmetry and one-hot stationarity") {
    // Balanced labels with a zero classifier: bias gradient cancels.
    Matrix batch(2, 4);
    batch(0, 0) = 1.0;
    batch(0, 1) = -1.0;
    batch(1, 2) = 1.0;
    batch(1, 3) = -1.0;
    const CeGradient grad = ce_grad(Matrix(2, 2), Vector(2, 0.0), batch, {0, 0, 1, 1});
    REQUIRE(norm2(grad.biases) == Catch::Approx(0.0).margin(1e-15));

    // A sample classified with certainty contributes no gradient.
    Matrix f(1, 2);
    f(0, 0) = 1000.0;
    const CeGradient sure = ce_grad(f, Vector(2, 0.0), Matrix{{1.0}}, {0});
    REQUIRE(max_abs(sure.weights) == Catch::Approx(0.0).margin(1e-300));
    REQUIRE(norm_inf(sure.biases) == Catch::Approx(0.0).margin(1e-300));
}

TEST_CASE("ce_grad matches central finite differences") {
    Rng rng(73);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t d = 3, c = 4, n = 12;
        const Matrix f = oracles::random_gaussian(d, c, rng);
        Vector b(c);
        for (double& x : b) x = rng.gaussian();
        const Matrix batch = oracles::random_gaussian(d, n, rng);
        const std::vector<int> y = random_labels(n, c, rng);

        const CeGradient grad = ce_grad(f, b, batch, y);
        const double h = 1e-4 * (1.0 + max_abs(f));

        double worst = 0.0;
        double scale = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            for (std::size_t k = 0; k < d; ++k) {
                Matrix lo = f, hi = f;
                hi(k, j) += h;
                lo(k, j) -= h;
                const double fd =
                    (ce_loss(hi, b, batch, y) - ce_loss(lo, b, batch, y)) / (2.0 * h);
                worst = std::max(worst, std::abs(fd - grad.weights(k, j)));
                scale = std::max(scale, std::abs(grad.weights(k, j)));
            }
            Vector blo = b, bhi = b;
            bhi[j] += h;
            blo[j] -= h;
            const double fd =
                (ce_loss(f, bhi, batch, y) - ce_loss(f, blo, batch, y)) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - grad.biases[j]));
            scale = std::max(scale, std::abs(grad.biases[j]));
        }
        REQUIRE(worst <= 1e-5 * std::max(scale, 1.0));
    }
}

TEST_CASE("hessian quadratic form: kernel, empty sum, positivity") {
    Rng rng(79);
    const Matrix f = oracles::random_gaussian(3, 4, rng);
    Vector b(4);
    for (double& x : b) x = rng.gaussian();
    const Matrix batch = oracles::random_gaussian(3, 10, rng);
    const std::vector<int> y = random_labels(10, 4, rng);

    // Equal columns lie in the Hessian kernel.
    Matrix equal_cols(3, 4);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k < 3; ++k) equal_cols(k, j) = 0.7 * static_cast<double>(k + 1);
    REQUIRE(hessian_quadform(f, b, batch, y, equal_cols) == 0.0);

    // Single class: the pair sum is empty.
    const Matrix f1 = oracles::random_gaussian(3, 1, rng);
    REQUIRE(hessian_quadform(f1, Vector(1, 0.0), batch, std::vector<int>(10, 0),
                             oracles::random_gaussian(3, 1, rng)) == 0.0);

    // Full-rank data, distinct columns: strictly positive; and non-negative
    // for arbitrary directions.
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix psi = oracles::random_gaussian(3, 4, rng);
        REQUIRE(hessian_quadform(f, b, batch, y, psi) > 0.0);
    }
}

TEST_CASE("hessian quadratic form matches second directional differences") {
    Rng rng(83);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t d = 3, c = 4, n = 15;
        const Matrix f = oracles::random_gaussian(d, c, rng);
        Vector b(c);
        for (double& x : b) x = rng.gaussian();
        const Matrix batch = oracles::random_gaussian(d, n, rng);
        const std::vector<int> y = random_labels(n, c, rng);
        const Matrix psi = oracles::random_gaussian(d, c, rng);

        const double quad = hessian_quadform(f, b, batch, y, psi);
        const double h = 1e-3;
        Matrix hi = f, lo = f;
        for (std::size_t i = 0; i < f.size(); ++i) {
            hi.storage()[i] += h * psi.storage()[i];
            lo.storage()[i] -= h * psi.storage()[i];
        }
        const double second = (ce_loss(hi, b, batch, y) - 2.0 * ce_loss(f, b, batch, y) +
                               ce_loss(lo, b, batch, y)) /
                              (h * h);
        REQUIRE(quad == Catch::Approx(second).epsilon(1e-4));
    }
}

TEST_CASE("orthogonality penalty closed forms") {
    Rng rng(89);
    const PenaltyConfig cfg{0.005, 0.0};

    MultiverseHeads one = random_heads(1, 3, 4, rng);
    const PenaltyResult none = ortho_penalty(one, OrthoMode::plain(), cfg);
    REQUIRE(none.value == 0.0);
    REQUIRE(max_abs(none.weight_grads[0]) == 0.0);

    // Identical heads: every coupling is the squared column norm.
    MultiverseHeads twin = random_heads(1, 3, 4, rng);
    twin.weights.push_back(twin.weights[0]);
    twin.biases.push_back(twin.biases[0]);
    double expected = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
        const Vector col = twin.weights[0].col(j);
        expected += cfg.lambda * dot(col, col);
    }
    const PenaltyResult same = ortho_penalty(twin, OrthoMode::plain(), cfg);
    REQUIRE(same.value == Catch::Approx(expected).epsilon(1e-12));

    // SwOrtho with a wrong-size scatter is a configuration error.
    REQUIRE_THROWS_AS(ortho_penalty(twin, OrthoMode::sw(Matrix::identity(2)), cfg),
                      ConfigError);
}

TEST_CASE("objective degenerates to the baseline loss") {
    Rng rng(97);
    MultiverseHeads heads = random_heads(1, 4, 3, rng);
    const Matrix batch = oracles::random_gaussian(4, 9, rng);
    const std::vector<int> y = random_labels(9, 3, rng);

    const ObjectiveResult obj =
        multiverse_objective(heads, batch, y, OrthoMode::plain(), PenaltyConfig{0.0, 0.0});
    REQUIRE(obj.value == ce_loss(heads.weights[0], heads.biases[0], batch, y));

    const CeGradient grad = ce_grad(heads.weights[0], heads.biases[0], batch, y);
    REQUIRE(obj.weight_grads[0].storage() == grad.weights.storage());
    REQUIRE(obj.bias_grads[0] == grad.biases);
}

TEST_CASE("objective of exactly orthogonal heads has no penalty term") {
    const PenaltyConfig cfg{0.005, 0.0005};
    MultiverseHeads heads;
    Matrix f1(2, 2);
    f1(0, 0) = 1.0;
    f1(0, 1) = 2.0;
    Matrix f2(2, 2);
    f2(1, 0) = -1.0;
    f2(1, 1) = 3.0;
    heads.weights = {f1, f2};
    heads.biases = {Vector(2, 0.0), Vector(2, 0.0)};
    Rng rng(101);
    const Matrix batch = oracles::random_gaussian(2, 8, rng);
    const std::vector<int> y = random_labels(8, 2, rng);

    const ObjectiveResult obj = multiverse_objective(heads, batch, y, OrthoMode::plain(), cfg);
    double expected = ce_loss(f1, heads.biases[0], batch, y) +
                      ce_loss(f2, heads.biases[1], batch, y);
    expected += cfg.weight_decay * (frobenius_norm(f1) * frobenius_norm(f1) +
                                    frobenius_norm(f2) * frobenius_norm(f2));
    REQUIRE(obj.value == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("full objective gradient matches finite differences away from kinks") {
    Rng rng(103);
    int tested = 0;
    while (tested < 5) {
        FlatObjective flat;
        flat.m = 3;
        flat.d = 3;
        flat.c = 3;
        flat.batch = oracles::random_gaussian(3, 10, rng);
        flat.labels = random_labels(10, 3, rng);
        flat.mode = OrthoMode::plain();
        flat.cfg = PenaltyConfig{0.005, 0.0005};
        const MultiverseHeads heads = random_heads(3, 3, 3, rng);

        // Kink exclusion: skip instances with a near-zero head coupling.
        bool near_kink = false;
        for (std::size_t j = 0; j < 3 && !near_kink; ++j)
            for (std::size_t r = 0; r < 3 && !near_kink; ++r)
                for (std::size_t s = r + 1; s < 3 && !near_kink; ++s)
                    if (std::abs(dot(heads.weights[r].col(j), heads.weights[s].col(j))) < 1e-3)
                        near_kink = true;
        if (near_kink) continue;
        ++tested;

        const ObjectiveResult obj =
            multiverse_objective(heads, flat.batch, flat.labels, flat.mode, flat.cfg);
        const Vector params = flat.flatten(heads);
        Vector analytic;
        for (std::size_t r = 0; r < 3; ++r) {
            for (double x : obj.weight_grads[r].storage()) analytic.push_back(x);
            for (double x : obj.bias_grads[r]) analytic.push_back(x);
        }

        const double h = 1e-5;
        double worst = 0.0;
        double scale = 1.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double fd = oracles::central_difference(
                [&](const Vector& p) { return flat(p); }, params, i, h);
            worst = std::max(worst, std::abs(fd - analytic[i]));
            scale = std::max(scale, std::abs(analytic[i]));
        }
        REQUIRE(worst <= 1e-5 * scale);
    }
}

TEST_CASE("ortho violation extremes") {
    MultiverseHeads heads;
    Matrix f1(2, 1);
    f1(0, 0) = 2.0;
    Matrix f2(2, 1);
    f2(1, 0) = -3.0;
    heads.weights = {f1, f2};
    heads.biases = {Vector(1, 0.0), Vector(1, 0.0)};
    REQUIRE(ortho_violation(heads, OrthoMode::plain()) == 0.0);

    heads.weights[1] = f1;
    REQUIRE(ortho_violation(heads, OrthoMode::plain()) == Catch::Approx(1.0));

    heads.weights[1] = Matrix(2, 1);
    REQUIRE_THROWS_AS(ortho_violation(heads, OrthoMode::plain()), DegenerateError);
}

TEST_CASE("ortho violation under the scatter metric") {
    // Q = diag(1, 0): the second coordinate is invisible to the metric.
    MultiverseHeads heads;
    Matrix f1(2, 1);
    f1(0, 0) = 1.0;
    f1(1, 0) = 5.0;
    Matrix f2(2, 1);
    f2(0, 0) = 1.0;
    f2(1, 0) = -7.0;
    heads.weights = {f1, f2};
    heads.biases = {Vector(1, 0.0), Vector(1, 0.0)};
    Matrix q(2, 2);
    q(0, 0) = 1.0;
    REQUIRE(ortho_violation(heads, OrthoMode::sw(q)) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("probability agreement detects and forgives") {
    Rng rng(107);
    MultiverseHeads heads = random_heads(1, 3, 4, rng);
    heads.weights.push_back(heads.weights[0]);
    heads.biases.push_back(heads.biases[0]);
    const Matrix batch = oracles::random_gaussian(3, 12, rng);
    REQUIRE(prob_agreement(heads, batch) == 0.0);

    // Lemma-style shifted head: same probabilities to roundoff.
    Vector shift(3);
    for (double& x : shift) x = rng.gaussian();
    const double offset = rng.gaussian();
    Matrix shifted = heads.weights[0];
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k < 3; ++k) shifted(k, j) += shift[k];
    Vector shifted_b = heads.biases[0];
    for (double& x : shifted_b) x += offset;
    heads.weights[1] = shifted;
    heads.biases[1] = shifted_b;
    REQUIRE(prob_agreement(heads, batch) <= 1e-12);

    // A genuinely different head disagrees.
    heads.weights[1] = oracles::random_gaussian(3, 4, rng, 2.0);
    REQUIRE(prob_agreement(heads, batch) > 1e-3);
}
