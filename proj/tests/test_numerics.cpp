#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "cyclecanon/numerics.hpp"

using namespace cyclecanon;

namespace {
Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    std::uniform_real_distribution<double> d(-1, 1);
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = Scalar(d(rng), d(rng));
    return m;
}

// Well-conditioned random invertible matrix: unitary * diag([1/2,2]) * unitary.
Matrix random_well_conditioned(std::mt19937_64& rng, std::size_t n) {
    auto haar = [&](std::size_t m) {
        Eigen::HouseholderQR<EMatrix> qr(to_eigen(random_matrix(rng, m, m)));
        return from_eigen(EMatrix(qr.householderQ()));
    };
    Matrix d(n, n);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = Scalar(u(rng), 0.0);
    return haar(n) * d * haar(n);
}

std::pair<double, double> singular_values_2x2(const Matrix& m) {
    // Independent closed-form oracle. The large value comes from the Gram
    // matrix; the small one from sigma1 * sigma2 = |det M|, which stays
    // accurate where the Gram route cancels.
    Matrix g = m.adjoint() * m;
    double tr = g(0, 0).real() + g(1, 1).real();
    double s1 = std::sqrt(tr);  // up to a factor <= sqrt(2)
    Scalar det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    double s2 = std::abs(det) / s1;
    return {s1, s2};
}
}  // namespace

TEST_CASE("rank_tol basics") {
    Tolerance tol;
    CHECK(rank_tol(zeros(3, 2), tol) == 0);
    CHECK(rank_tol(identity(4), tol) == 4);
    CHECK(rank_tol(Matrix(0, 5), tol) == 0);
}

TEST_CASE("rank_tol near-singular 2x2 decided against closed-form singular values") {
    Tolerance tol;  // eps = 1e-9
    Matrix m{{Scalar(1), Scalar(1)}, {Scalar(1), Scalar(1 + 1e-15)}};
    auto [s1, s2] = singular_values_2x2(m);
    REQUIRE(s1 > 0);
    CHECK(s2 / s1 < tol.eps);  // the oracle says rank 1 at this threshold
    CHECK(rank_tol(m, tol) == 1);
}

TEST_CASE("rank is stable under transpose and conjugation") {
    Tolerance tol;
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a = random_matrix(rng, 4, 3);
        Matrix b = random_matrix(rng, 3, 4);
        Matrix m = a * b;  // rank <= 3
        auto r = rank_tol(m, tol);
        CHECK(r == rank_tol(m.transpose(), tol));
        CHECK(r == rank_tol(m.conj(), tol));
    }
}

TEST_CASE("nullspace and column space dimensions are complementary") {
    Tolerance tol;
    std::mt19937_64 rng(3);
    Matrix a = random_matrix(rng, 4, 2);
    Matrix b = random_matrix(rng, 2, 5);
    Matrix m = a * b;
    Matrix ns = nullspace(m, tol);
    Matrix cs = column_space(m, tol);
    CHECK(ns.cols() == 3);
    CHECK(cs.cols() == 2);
    CHECK((m * ns).max_abs() < 1e-10);
}

TEST_CASE("jordan_structure on exact inputs") {
    Tolerance tol;
    SECTION("nilpotent 2x2") {
        auto js = jordan_structure(Matrix{{Scalar(0), Scalar(1)}, {Scalar(0), Scalar(0)}}, tol);
        REQUIRE(js.blocks.size() == 1);
        CHECK(js.blocks[0].second == 2);
        CHECK(std::abs(js.blocks[0].first) < 1e-9);
    }
    SECTION("identity 3x3 gives three 1-blocks") {
        auto js = jordan_structure(identity(3), tol);
        REQUIRE(js.blocks.size() == 3);
        for (auto& b : js.blocks) {
            CHECK(b.second == 1);
            CHECK(std::abs(b.first - Scalar(1)) < 1e-9);
        }
    }
    SECTION("an explicit Jordan block is recovered") {
        auto js = jordan_structure(jordan_block(Scalar(5), 2), tol);
        REQUIRE(js.blocks.size() == 1);
        CHECK(js.blocks[0].second == 2);
        CHECK(std::abs(js.blocks[0].first - Scalar(5)) < 1e-9);
    }
    SECTION("0x0 gives the empty multiset") {
        CHECK(jordan_structure(Matrix(0, 0), tol).blocks.empty());
    }
}

TEST_CASE("jordan_structure invariant under well-conditioned similarity") {
    Tolerance tol;
    std::mt19937_64 rng(5);
    Matrix j = direct_sum(jordan_block(Scalar(2), 2), jordan_block(Scalar(5), 1));
    for (int trial = 0; trial < 10; ++trial) {
        Matrix s = random_well_conditioned(rng, 3);
        Matrix a = inverse(s) * j * s;
        auto js = jordan_structure(a, tol);
        REQUIRE(js.blocks.size() == 2);
        // sorted by eigenvalue: (2,2) then (5,1)
        CHECK(js.blocks[0].second == 2);
        CHECK(std::abs(js.blocks[0].first - Scalar(2)) < 1e-6);
        CHECK(js.blocks[1].second == 1);
        CHECK(std::abs(js.blocks[1].first - Scalar(5)) < 1e-6);
    }
}

TEST_CASE("jordan_structure reconstructs its own Weyr data") {
    Tolerance tol;
    std::mt19937_64 rng(9);
    Matrix j = direct_sum(direct_sum(jordan_block(Scalar(1), 2), jordan_block(Scalar(1), 1)),
                          jordan_block(Scalar(-3), 2));
    Matrix s = random_well_conditioned(rng, 5);
    auto js = jordan_structure(inverse(s) * j * s, tol);
    Matrix rebuilt(0, 0);
    for (auto& b : js.blocks) rebuilt = direct_sum(rebuilt, jordan_block(b.first, b.second));
    auto js2 = jordan_structure(rebuilt, tol);
    REQUIRE(js.blocks.size() == js2.blocks.size());
    for (std::size_t i = 0; i < js.blocks.size(); ++i) {
        CHECK(js.blocks[i].second == js2.blocks[i].second);
        CHECK(std::abs(js.blocks[i].first - js2.blocks[i].first) < 1e-6);
    }
}

TEST_CASE("alternating_word") {
    CHECK((alternating_word(identity(2), 3) - identity(2)).max_abs() == 0.0);
    Matrix i1{{Scalar(0, 1)}};
    CHECK(std::abs(alternating_word(i1, 2)(0, 0) - Scalar(1)) < 1e-15);
    Matrix j2{{Scalar(0), Scalar(1)}, {Scalar(0), Scalar(0)}};
    CHECK(alternating_word(j2, 2).max_abs() == 0.0);
}
