#pragma once

// Independent verification tools. Nothing here calls into the reduction
// pipeline; everything is built from rank computations so the acceptance
// suite has a second route to the same invariants.

#include <map>
#include <vector>

#include "chains.hpp"
#include "cycle.hpp"
#include "numerics.hpp"

namespace cyclecanon {

// Rank equality of two matrices, read in a threshold-robust way: the ranks
// agree when some common relative cutoff assigns both the same value. Long
// alternating-word products push true singular values across many decades,
// so a single fixed cutoff cannot compare them meaningfully.
inline bool ranks_consistent(const Matrix& a, const Matrix& b, double lo = 1e-13,
                             double hi = 1e-4) {
    auto profile = [](const Matrix& m) {
        std::vector<double> sv;
        if (!m.empty()) {
            Eigen::JacobiSVD<EMatrix> svd(to_eigen(m));
            for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
                sv.push_back(svd.singularValues()(i));
        }
        return sv;
    };
    auto rank_at = [](const std::vector<double>& sv, double cut) {
        if (sv.empty() || sv[0] <= 0.0) return std::size_t{0};
        std::size_t r = 0;
        for (double s : sv)
            if (s > cut * sv[0]) ++r;
        return r;
    };
    const auto sa = profile(a), sb = profile(b);
    for (double cut = lo; cut <= hi * 1.0001; cut *= 10.0)
        if (rank_at(sa, cut) == rank_at(sb, cut)) return true;
    return false;
}

// As above for the whole alternating-word rank sequence of two matrices.
inline bool alternating_word_ranks_consistent(const Matrix& a, const Matrix& b,
                                              std::size_t max_len) {
    for (std::size_t j = 1; j <= max_len; ++j)
        if (!ranks_consistent(alternating_word(a, j), alternating_word(b, j))) return false;
    return true;
}

// Multiplicities of the interval summands of the acyclic part, computed from
// window ranks only. For a window [a, b], the rank of the canonical map
// (compatible sections over the window) -> (colimit of the window) counts
// exactly the chains whose interval contains the window; inclusion-exclusion
// over the four corners recovers each multiplicity.
inline std::map<ChainType, std::size_t> chain_multiplicity_oracle(const NormalizedCycle& nc,
                                                                  const Tolerance& tol) {
    const CycleSpec& c = nc.cycle;
    int total = 0;
    for (int d : c.dims) total += d;
    if (total > 12) throw TooLarge("chain_multiplicity_oracle: total dimension exceeds 12");
    for (int e = 1; e <= c.t - 1; ++e)
        if (c.edge(e).semilinear)
            throw CycleError("chain_multiplicity_oracle: edges 1..t-1 must be linear");

    const int t = c.t;
    auto dim = [&](int k) { return static_cast<std::size_t>(c.dim(k)); };

    // window_rank(a, b) = rank(lim -> colim) over spaces a..b
    auto window_rank = [&](int a, int b) -> std::size_t {
        std::size_t n = 0;
        std::vector<std::size_t> offset(static_cast<std::size_t>(b - a + 1));
        for (int k = a; k <= b; ++k) {
            offset[static_cast<std::size_t>(k - a)] = n;
            n += dim(k);
        }
        if (n == 0) return 0;

        // sections: stack one block row per edge in the window
        std::size_t crows = 0;
        for (int e = a; e <= b - 1; ++e) crows += edge_forward(c, e) ? dim(e + 1) : dim(e);
        Matrix cons(crows, n);
        std::size_t r0 = 0;
        for (int e = a; e <= b - 1; ++e) {
            const Matrix& m = c.edge(e).matrix;
            if (edge_forward(c, e)) {
                // v_{e+1} - A v_e = 0
                for (std::size_t i = 0; i < dim(e + 1); ++i)
                    cons(r0 + i, offset[static_cast<std::size_t>(e + 1 - a)] + i) = Scalar(1.0);
                for (std::size_t i = 0; i < m.rows(); ++i)
                    for (std::size_t j = 0; j < m.cols(); ++j)
                        cons(r0 + i, offset[static_cast<std::size_t>(e - a)] + j) -= m(i, j);
                r0 += dim(e + 1);
            } else {
                // v_e - A v_{e+1} = 0
                for (std::size_t i = 0; i < dim(e); ++i)
                    cons(r0 + i, offset[static_cast<std::size_t>(e - a)] + i) = Scalar(1.0);
                for (std::size_t i = 0; i < m.rows(); ++i)
                    for (std::size_t j = 0; j < m.cols(); ++j)
                        cons(r0 + i, offset[static_cast<std::size_t>(e + 1 - a)] + j) -= m(i, j);
                r0 += dim(e);
            }
        }
        Matrix sections = (crows == 0) ? identity(n) : nullspace(cons, tol);

        // colimit relations: one block column per (edge, domain basis vector)
        std::size_t lcols = 0;
        for (int e = a; e <= b - 1; ++e) lcols += edge_forward(c, e) ? dim(e) : dim(e + 1);
        Matrix rel(n, lcols);
        std::size_t c0 = 0;
        for (int e = a; e <= b - 1; ++e) {
            const Matrix& m = c.edge(e).matrix;
            const int dom = edge_forward(c, e) ? e : e + 1;
            const int cod = edge_forward(c, e) ? e + 1 : e;
            for (std::size_t j = 0; j < dim(dom); ++j) {
                rel(offset[static_cast<std::size_t>(dom - a)] + j, c0 + j) = Scalar(1.0);
                for (std::size_t i = 0; i < dim(cod); ++i)
                    rel(offset[static_cast<std::size_t>(cod - a)] + i, c0 + j) -= m(i, j);
            }
            c0 += dim(dom);
        }
        const std::size_t rank_rel = rank_tol(rel, tol);
        return rank_tol(hstack(rel, sections), tol) - rank_rel;
    };

    std::map<std::pair<int, int>, std::size_t> r;
    for (int a = 1; a <= t; ++a)
        for (int b = a; b <= t; ++b) r[{a, b}] = window_rank(a, b);
    auto get = [&](int a, int b) -> long {
        if (a < 1 || b > t || a > b) return 0;
        return static_cast<long>(r.at({a, b}));
    };
    std::map<ChainType, std::size_t> out;
    for (int p = 1; p <= t; ++p)
        for (int q = p; q <= t; ++q) {
            long m = get(p, q) - get(p - 1, q) - get(p, q + 1) + get(p - 1, q + 1);
            if (m < 0) throw CycleError("chain_multiplicity_oracle: negative multiplicity");
            if (m > 0) out[ChainType{p, q}] = static_cast<std::size_t>(m);
        }
    return out;
}

}  // namespace cyclecanon
