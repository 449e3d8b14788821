#include <catch2/catch_amalgamated.hpp>

#include "multiverse/matrix.hpp"

using namespace multiverse;

TEST_CASE("matrix basics") {
    Matrix a{{1.0, 2.0}, {3.0, 4.0}};
    REQUIRE(a.rows() == 2);
    REQUIRE(a(1, 0) == 3.0);

    const Matrix t = transpose(a);
    REQUIRE(t(0, 1) == 3.0);

    const Matrix prod = matmul(a, Matrix::identity(2));
    REQUIRE(prod(0, 1) == 2.0);
    REQUIRE(prod(1, 1) == 4.0);

    REQUIRE_THROWS_AS(matmul(a, Matrix(3, 2)), std::invalid_argument);
}

TEST_CASE("matvec and quadratic form") {
    const Matrix a{{2.0, 0.0}, {0.0, 3.0}};
    const Vector v{1.0, -1.0};
    const Vector av = matvec(a, v);
    REQUIRE(av[0] == 2.0);
    REQUIRE(av[1] == -3.0);
    REQUIRE(quadratic_form(v, a) == Catch::Approx(5.0));

    const Matrix rect{{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
    const Vector atv = matvec_transposed(rect, Vector{1.0, 1.0});
    REQUIRE(atv[0] == 5.0);
    REQUIRE(atv[2] == 9.0);
}

TEST_CASE("symmetrize and symmetry test") {
    const Matrix a{{1.0, 2.0}, {0.0, 1.0}};
    REQUIRE_FALSE(is_symmetric(a));
    const Matrix s = symmetrize(a);
    REQUIRE(is_symmetric(s));
    REQUIRE(s(0, 1) == 1.0);
}

TEST_CASE("norms and trace") {
    const Matrix a{{3.0, 0.0}, {0.0, 4.0}};
    REQUIRE(frobenius_norm(a) == Catch::Approx(5.0));
    REQUIRE(trace(a) == 7.0);
    REQUIRE(max_abs(a) == 4.0);
    REQUIRE(norm_inf(Vector{-7.0, 2.0}) == 7.0);
}
