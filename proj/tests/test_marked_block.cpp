#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "cyclecanon/marked_block.hpp"
#include "test_helpers.hpp"

using namespace cyclecanon;

namespace {

// checks R/S invertible, block upper triangular, coupled, and the residual
void check_transforms(const MarkedBlockMatrix& in, const BlockReduction& red, double tol = 1e-8) {
    const Matrix& r = red.r_transform;
    const Matrix& s = red.s_transform;
    REQUIRE(r.rows() == in.entries.cols());
    REQUIRE(s.rows() == in.entries.rows());
    CHECK(condition_number(r) < 1e12);
    CHECK(condition_number(s) < 1e12);

    auto strip_of = [](const std::vector<std::size_t>& sizes, std::size_t i) {
        std::size_t acc = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            acc += sizes[k];
            if (i < acc) return k;
        }
        return sizes.size();
    };
    for (std::size_t i = 0; i < r.rows(); ++i)
        for (std::size_t j = 0; j < r.cols(); ++j)
            if (strip_of(in.col_strips, i) > strip_of(in.col_strips, j))
                CHECK(std::abs(r(i, j)) < 1e-9);
    for (std::size_t i = 0; i < s.rows(); ++i)
        for (std::size_t j = 0; j < s.cols(); ++j)
            if (strip_of(in.row_strips, i) > strip_of(in.row_strips, j))
                CHECK(std::abs(s(i, j)) < 1e-9);

    if (!in.crossings.empty()) {
        const auto& c = in.crossings.front();
        std::size_t r0 = 0, c0 = 0;
        for (std::size_t k = 0; k < c.row_strip; ++k) r0 += in.row_strips[k];
        for (std::size_t k = 0; k < c.col_strip; ++k) c0 += in.col_strips[k];
        const std::size_t w = in.row_strips[c.row_strip];
        Matrix rb = r.block(c0, c0, w, w);
        Matrix sb = s.block(r0, r0, w, w);
        CHECK((rb - sb).max_abs() < 1e-8 * std::max(1.0, rb.max_abs()));
    }

    Matrix lhs = red.dashed ? inverse(s.conj()) * in.entries * r : inverse(s) * in.entries * r;
    const double resid =
        (lhs - red.final_form).frobenius_norm() / std::max(1.0, in.entries.frobenius_norm());
    INFO("transform residual " << resid);
    CHECK(resid < tol);
}

void check_zero_one(const BlockReduction& red) {
    for (std::size_t i = 0; i < red.final_form.rows(); ++i) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < red.final_form.cols(); ++j) {
            bool reg_pos = false;
            for (const auto& piece : red.regular)
                if (std::count(piece.rows.begin(), piece.rows.end(), i) &&
                    std::count(piece.cols.begin(), piece.cols.end(), j))
                    reg_pos = true;
            if (reg_pos) continue;
            const Scalar v = red.final_form(i, j);
            CHECK((v == Scalar(0.0) || v == Scalar(1.0)));
            if (v == Scalar(1.0)) ++count;
        }
        CHECK(count <= 1);
    }
    for (std::size_t j = 0; j < red.final_form.cols(); ++j) {
        std::size_t count = 0;
        for (std::size_t i = 0; i < red.final_form.rows(); ++i) {
            bool reg_pos = false;
            for (const auto& piece : red.regular)
                if (std::count(piece.rows.begin(), piece.rows.end(), i) &&
                    std::count(piece.cols.begin(), piece.cols.end(), j))
                    reg_pos = true;
            if (!reg_pos && red.final_form(i, j) == Scalar(1.0)) ++count;
        }
        CHECK(count <= 1);
    }
}

MarkedBlockMatrix random_instance(std::mt19937_64& rng, bool crossed, bool dashed) {
    MarkedBlockMatrix m;
    const std::size_t nr = 1 + rng() % 3, nc = 1 + rng() % 3;
    for (std::size_t i = 0; i < nr; ++i) m.row_strips.push_back(rng() % 3);
    for (std::size_t j = 0; j < nc; ++j) m.col_strips.push_back(rng() % 3);
    if (crossed) {
        const std::size_t w = 1 + rng() % 3;
        m.row_strips[rng() % nr] = 0;  // make room anywhere
        m.row_strips.push_back(w);
        m.col_strips.push_back(w);
        std::shuffle(m.row_strips.begin(), m.row_strips.end(), rng);
        // place the crossing at matching sizes: easiest is to append strips
        m.row_strips.push_back(w);
        m.col_strips.push_back(w);
        m.crossings.push_back({m.row_strips.size() - 1, m.col_strips.size() - 1,
                               dashed ? CrossKind::Dashed : CrossKind::Full});
    }
    std::size_t rows = 0, cols = 0;
    for (std::size_t s : m.row_strips) rows += s;
    for (std::size_t s : m.col_strips) cols += s;
    m.entries = cctest::random_matrix(rng, rows, cols);
    return m;
}

std::size_t weld_count(const BlockReduction& red) { return red.welds.size(); }

}  // namespace

TEST_CASE("single uncrossed block reduces to rank-many welds") {
    Tolerance tol;
    MarkedBlockMatrix m;
    m.row_strips = {2};
    m.col_strips = {2};
    m.entries = Matrix{{Scalar(0), Scalar(1)}, {Scalar(0), Scalar(0)}};
    auto red = reduce_marked(m, tol);
    CHECK(weld_count(red) == 1);
    check_transforms(m, red);
    check_zero_one(red);
    // pieces: one [1], one 1x0 row, one 0x1 col
    std::size_t ones = 0;
    for (const auto& s : red.summands) {
        CHECK(s.kind == BlockReductionResult::Kind::ZeroOne);
        for (const auto& v : s.block.data())
            if (v == Scalar(1.0)) ++ones;
    }
    CHECK(ones == 1);
    CHECK(red.summands.size() == 3);
}

TEST_CASE("single full-crossed nonsingular block is finished as crossed summand") {
    Tolerance tol;
    MarkedBlockMatrix m;
    m.row_strips = {1};
    m.col_strips = {1};
    m.entries = Matrix{{Scalar(2)}};
    m.crossings.push_back({0, 0, CrossKind::Full});
    auto red = reduce_marked(m, tol);
    REQUIRE(red.summands.size() == 1);
    CHECK(red.summands[0].kind == BlockReductionResult::Kind::NonsingularCrossed);
    CHECK(red.summands[0].block(0, 0) == Scalar(2));
    CHECK(red.summands[0].cross == CrossKind::Full);
    check_transforms(m, red);
}

TEST_CASE("single dashed-crossed nilpotent block keeps its 0/1 pattern") {
    Tolerance tol;
    MarkedBlockMatrix m;
    m.row_strips = {2};
    m.col_strips = {2};
    m.entries = Matrix{{Scalar(0), Scalar(1)}, {Scalar(0), Scalar(0)}};
    m.crossings.push_back({0, 0, CrossKind::Dashed});
    auto red = reduce_marked(m, tol);
    CHECK(red.regular.empty());
    CHECK(weld_count(red) == 1);
    check_transforms(m, red);
    check_zero_one(red);
}

TEST_CASE("full-crossed mixed block: nonsingular and nilpotent parts split") {
    Tolerance tol;
    std::mt19937_64 rng(5);
    // plant diag(J_1(3), J_2(0)) under a similarity
    Matrix planted = direct_sum(jordan_block(Scalar(3), 1), jordan_block(Scalar(0), 2));
    Matrix s = cctest::random_well_conditioned(rng, 3);
    MarkedBlockMatrix m;
    m.row_strips = {3};
    m.col_strips = {3};
    m.entries = inverse(s) * planted * s;
    m.crossings.push_back({0, 0, CrossKind::Full});
    auto red = reduce_marked(m, tol);
    REQUIRE(red.regular.size() == 1);
    CHECK(red.regular[0].content.rows() == 1);
    CHECK(std::abs(red.regular[0].content(0, 0) - Scalar(3)) < 1e-7);
    CHECK(weld_count(red) == 1);  // the J_2(0) superdiagonal
    check_transforms(m, red);
}

TEST_CASE("dashed-crossed planted consimilarity content") {
    Tolerance tol;
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix planted = direct_sum(h_block(Scalar(-2), 1), jordan_block(Scalar(0), 2));
        Matrix s = cctest::random_well_conditioned(rng, 4);
        MarkedBlockMatrix m;
        m.row_strips = {4};
        m.col_strips = {4};
        m.entries = inverse(s.conj()) * planted * s;
        m.crossings.push_back({0, 0, CrossKind::Dashed});
        auto red = reduce_marked(m, tol);
        REQUIRE(red.regular.size() == 1);
        CHECK(red.regular[0].content.rows() == 2);
        check_transforms(m, red);
    }
}

TEST_CASE("strips with several blocks reduce with valid transforms") {
    Tolerance tol;
    std::mt19937_64 rng(2025);
    int done = 0;
    for (int trial = 0; trial < 60; ++trial) {
        bool crossed = trial % 3 != 0;
        bool dashed = trial % 2 == 0;
        auto m = random_instance(rng, crossed, dashed);
        if (m.entries.rows() == 0 && m.entries.cols() == 0) continue;
        CAPTURE(trial, crossed, dashed, m.entries.rows(), m.entries.cols());
        auto red = reduce_marked(m, tol);
        check_transforms(m, red);
        check_zero_one(red);
        ++done;
    }
    CHECK(done > 30);
}

TEST_CASE("block direct sums reduce to the union of the summand multisets") {
    Tolerance tol;
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        // same disposition: one uncrossed strip pair
        auto gen = [&](std::size_t r, std::size_t c) {
            MarkedBlockMatrix m;
            m.row_strips = {r};
            m.col_strips = {c};
            m.entries = cctest::random_matrix(rng, r, c);
            return m;
        };
        auto a = gen(1 + rng() % 3, 1 + rng() % 3);
        auto b = gen(1 + rng() % 3, 1 + rng() % 3);
        MarkedBlockMatrix sum;
        sum.row_strips = {a.row_strips[0] + b.row_strips[0]};
        sum.col_strips = {a.col_strips[0] + b.col_strips[0]};
        sum.entries = direct_sum(a.entries, b.entries);
        auto ra = reduce_marked(a, tol);
        auto rb = reduce_marked(b, tol);
        auto rs = reduce_marked(sum, tol);
        CHECK(weld_count(rs) == weld_count(ra) + weld_count(rb));
        check_transforms(sum, rs);
    }
}

TEST_CASE("reducing the finished 0/1 form returns it unchanged up to permutation") {
    Tolerance tol;
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        auto m = random_instance(rng, false, false);
        if (m.entries.rows() == 0 || m.entries.cols() == 0) continue;
        auto red = reduce_marked(m, tol);
        MarkedBlockMatrix again;
        again.row_strips = m.row_strips;
        again.col_strips = m.col_strips;
        again.entries = red.final_form;
        auto red2 = reduce_marked(again, tol);
        CHECK(weld_count(red2) == weld_count(red));
    }
}
