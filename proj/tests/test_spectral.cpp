#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "cyclecanon/spectral.hpp"
#include "cyclecanon/oracle.hpp"
#include "test_helpers.hpp"

using namespace cyclecanon;

namespace {
Matrix rnd(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    std::uniform_real_distribution<double> d(-1, 1);
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = Scalar(d(rng), d(rng));
    return m;
}

Matrix random_well_conditioned(std::mt19937_64& rng, std::size_t n) {
    auto haar = [&](std::size_t m) {
        Eigen::HouseholderQR<EMatrix> qr(to_eigen(rnd(rng, m, m)));
        return from_eigen(EMatrix(qr.householderQ()));
    };
    Matrix d(n, n);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = Scalar(u(rng), 0.0);
    return haar(n) * d * haar(n);
}

double sim_residual(const Matrix& a, const SimCanonical& s) {
    return (solve_lstsq(s.transform, a * s.transform) - s.canonical).frobenius_norm();
}

double consim_residual(const Matrix& a, const ConsimCanonical& s) {
    return (solve_lstsq(s.transform.conj(), a * s.transform) - s.canonical).frobenius_norm();
}

}  // namespace

TEST_CASE("similarity canonical on exact forms") {
    Tolerance tol;
    SECTION("J_2(0) is already canonical") {
        Matrix a{{Scalar(0), Scalar(1)}, {Scalar(0), Scalar(0)}};
        auto s = similarity_canonical(a, tol);
        REQUIRE(s.cls.blocks.size() == 1);
        CHECK(s.cls.blocks[0].second == 2);
        CHECK(sim_residual(a, s) < 1e-10);
    }
    SECTION("diag(3,3) gives two 1-blocks") {
        Matrix a{{Scalar(3), Scalar(0)}, {Scalar(0), Scalar(3)}};
        auto s = similarity_canonical(a, tol);
        REQUIRE(s.cls.blocks.size() == 2);
        CHECK(s.cls.blocks[0].second == 1);
        CHECK(s.cls.blocks[1].second == 1);
        CHECK(sim_residual(a, s) < 1e-10);
    }
}

TEST_CASE("similarity canonical on planted instances") {
    Tolerance tol;
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        Matrix j = direct_sum(jordan_block(Scalar(2), 2), jordan_block(Scalar(5), 1));
        Matrix s = random_well_conditioned(rng, 3);
        Matrix a = inverse(s) * j * s;
        auto sc = similarity_canonical(a, tol);
        REQUIRE(sc.cls.blocks.size() == 2);
        CHECK(sc.cls.blocks[0].second == 2);
        CHECK(std::abs(sc.cls.blocks[0].first - Scalar(2)) < 1e-6);
        CHECK(sc.cls.blocks[1].second == 1);
        CHECK(std::abs(sc.cls.blocks[1].first - Scalar(5)) < 1e-6);
        CHECK(sim_residual(a, sc) < 1e-7);
    }
}

TEST_CASE("similarity canonical with nilpotent and repeated structure") {
    Tolerance tol;
    std::mt19937_64 rng(18);
    Matrix j = direct_sum(direct_sum(jordan_block(Scalar(0), 2), jordan_block(Scalar(0), 1)),
                          jordan_block(Scalar(1, 1), 2));
    Matrix s = random_well_conditioned(rng, 5);
    Matrix a = inverse(s) * j * s;
    auto sc = similarity_canonical(a, tol);
    REQUIRE(sc.cls.blocks.size() == 3);
    CHECK(sim_residual(a, sc) < 1e-7);
}

TEST_CASE("consimilarity canonical: 1x1 cases are Type I with lambda = |a|") {
    Tolerance tol;
    SECTION("[-1]") {
        auto c = consimilarity_canonical(Matrix{{Scalar(-1)}}, tol);
        REQUIRE(c.cls.type1.size() == 1);
        CHECK(c.cls.type1[0].first == Catch::Approx(1.0));
        CHECK(c.cls.type1[0].second == 1);
        CHECK(consim_residual(Matrix{{Scalar(-1)}}, c) < 1e-9);
    }
    SECTION("[i]") {
        auto c = consimilarity_canonical(Matrix{{Scalar(0, 1)}}, tol);
        REQUIRE(c.cls.type1.size() == 1);
        CHECK(c.cls.type1[0].first == Catch::Approx(1.0));
    }
    SECTION("random scalars") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> d(-2, 2);
        for (int i = 0; i < 25; ++i) {
            Scalar z(d(rng), d(rng));
            if (std::abs(z) < 0.1) continue;
            Matrix a{{z}};
            auto c = consimilarity_canonical(a, tol);
            REQUIRE(c.cls.type1.size() == 1);
            CHECK(c.cls.type1[0].first == Catch::Approx(std::abs(z)));
            CHECK(consim_residual(a, c) < 1e-8);
        }
    }
    SECTION("[0] is Type 0") {
        auto c = consimilarity_canonical(Matrix{{Scalar(0)}}, tol);
        REQUIRE(c.cls.type0.size() == 1);
        CHECK(c.cls.type0[0] == 1);
    }
}

TEST_CASE("consimilarity canonical: J_2(0) is Type 0 of size 2") {
    Tolerance tol;
    Matrix a{{Scalar(0), Scalar(1)}, {Scalar(0), Scalar(0)}};
    auto c = consimilarity_canonical(a, tol);
    REQUIRE(c.cls.type0.size() == 1);
    CHECK(c.cls.type0[0] == 2);
    CHECK(c.cls.type1.empty());
    CHECK(c.cls.type2.empty());
    CHECK(consim_residual(a, c) < 1e-9);
}

TEST_CASE("consimilarity canonical: planted H_4(-2)") {
    Tolerance tol;
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix h = h_block(Scalar(-2), 2);
        Matrix s = random_well_conditioned(rng, 4);
        Matrix a = inverse(s.conj()) * h * s;
        auto c = consimilarity_canonical(a, tol);
        REQUIRE(c.cls.type2.size() == 1);
        CHECK(c.cls.type2[0].second == 4);
        CHECK(std::abs(c.cls.type2[0].first - Scalar(-2)) < 1e-6);
        CHECK(c.cls.type0.empty());
        CHECK(c.cls.type1.empty());
        CHECK(consim_residual(a, c) < 1e-7);
    }
}

TEST_CASE("consimilarity canonical: planted nonreal H and mixed sums") {
    Tolerance tol;
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix m = direct_sum(h_block(Scalar(1, 2), 1), jordan_block(Scalar(1.5), 1));
        m = direct_sum(m, jordan_block(Scalar(0), 2));
        Matrix s = random_well_conditioned(rng, 5);
        Matrix a = inverse(s.conj()) * m * s;
        auto c = consimilarity_canonical(a, tol);
        REQUIRE(c.cls.type2.size() == 1);
        CHECK(std::abs(c.cls.type2[0].first - Scalar(1, 2)) < 1e-6);
        CHECK(c.cls.type2[0].second == 2);
        REQUIRE(c.cls.type1.size() == 1);
        CHECK(c.cls.type1[0].first == Catch::Approx(1.5));
        REQUIRE(c.cls.type0.size() == 1);
        CHECK(c.cls.type0[0] == 2);
        CHECK(consim_residual(a, c) < 1e-7);
    }
}

TEST_CASE("consimilarity invariants: spectrum and word ranks match the canonical form") {
    Tolerance tol;
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t n = 1 + rng() % 5;
        Matrix a = rnd(rng, n, n);
        auto c = consimilarity_canonical(a, tol);
        CHECK(cctest::multisets_close(eigenvalues(a * a.conj()),
                                      eigenvalues(c.canonical * c.canonical.conj()), 1e-6));
        CHECK(alternating_word_ranks_consistent(a, c.canonical, 2 * n));
    }
}

TEST_CASE("consimilarity class is invariant under consimilarity") {
    Tolerance tol;
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix a = rnd(rng, 3, 3);
        auto c1 = consimilarity_canonical(a, tol);
        Matrix s = random_well_conditioned(rng, 3);
        Matrix b = inverse(s.conj()) * a * s;
        auto c2 = consimilarity_canonical(b, tol);
        CHECK(c1.cls.type0 == c2.cls.type0);
        REQUIRE(c1.cls.type1.size() == c2.cls.type1.size());
        for (std::size_t i = 0; i < c1.cls.type1.size(); ++i) {
            CHECK(c1.cls.type1[i].first == Catch::Approx(c2.cls.type1[i].first).margin(1e-6));
            CHECK(c1.cls.type1[i].second == c2.cls.type1[i].second);
        }
        REQUIRE(c1.cls.type2.size() == c2.cls.type2.size());
        for (std::size_t i = 0; i < c1.cls.type2.size(); ++i) {
            CHECK(std::abs(c1.cls.type2[i].first - c2.cls.type2[i].first) < 1e-6);
            CHECK(c1.cls.type2[i].second == c2.cls.type2[i].second);
        }
    }
}
