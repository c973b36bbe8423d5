#pragma once

// Decomposition of the acyclic part A_1, ..., A_{t-1} into disjoint chains.
//
// A chain of type (p, q) is one basis vector per space V_p .. V_q, with each
// edge inside the interval linking consecutive vectors and the boundary
// edges killing the end vectors when they point out of the interval. We
// compute chains with explicit vectors, sweeping edges left to right:
// at each edge the alive chains are processed in a priority order under
// which every already-processed chain is a legal donor of the current one
// (a donation adds a multiple of the donor's vectors to the receiver on the
// whole overlap of their intervals and is exactly the basis freedom the
// admissible transforms allow).
//
// The priority order at the frontier space: insert classes (= chain start p)
// longest-first; a shorter class goes after everything present when the edge
// left of its start points into the interval, before everything otherwise.
// The analogous rule at V_1 orders classes by their end q.

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "cycle.hpp"
#include "normalize.hpp"
#include "numerics.hpp"

namespace cyclecanon {

struct ChainType {
    int p = 0, q = 0;
    friend bool operator==(const ChainType&, const ChainType&) = default;
    friend auto operator<=>(const ChainType&, const ChainType&) = default;
};

struct Chain {
    int p = 1;
    int q = 0;                 // current end; q < p means not started
    std::vector<Matrix> vecs;  // vecs[k-p] is a dims[k] x 1 column, input coordinates
    const Matrix& at(int space) const { return vecs[static_cast<std::size_t>(space - p)]; }
    Matrix& at(int space) { return vecs[static_cast<std::size_t>(space - p)]; }
    bool alive_at(int space) const { return p <= space && space <= q; }
};

// Add coeff * donor to receiver on the whole overlap of their intervals.
inline void donate(Chain& receiver, const Chain& donor, const Scalar& coeff) {
    const int lo = std::max(receiver.p, donor.p);
    const int hi = std::min(receiver.q, donor.q);
    for (int k = lo; k <= hi; ++k)
        receiver.at(k) = receiver.at(k) + coeff * donor.at(k);
}

inline void scale_chain(Chain& c, const Scalar& s) {
    for (auto& v : c.vecs) v = s * v;
}

// true when edge e (1 <= e <= t-1) points from V_e to V_{e+1}.
inline bool edge_forward(const CycleSpec& c, int e) { return c.edge(e).tail == e; }

// Priority order of start-classes at `space`: returns the present p values in
// donor-before-receiver order.
inline std::vector<int> class_order_at(const CycleSpec& c, const std::vector<int>& classes_present,
                                       int /*space*/) {
    std::vector<int> ps = classes_present;
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    std::deque<int> order;
    for (int p : ps) {
        if (order.empty())
            order.push_back(p);
        else if (edge_forward(c, p - 1))
            order.push_back(p);
        else
            order.push_front(p);
    }
    return {order.begin(), order.end()};
}

// Order of end-classes at V_1 (types (1, q)), donor-before-receiver.
inline std::vector<int> end_class_order(const CycleSpec& c, const std::vector<int>& qs_present) {
    std::vector<int> qs = qs_present;
    std::sort(qs.begin(), qs.end(), std::greater<int>());
    qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
    std::deque<int> order;
    for (int q : qs) {
        if (order.empty())
            order.push_back(q);
        else if (edge_forward(c, q))
            order.push_front(q);
        else
            order.push_back(q);
    }
    return {order.begin(), order.end()};
}

struct TransformShape {
    std::vector<ChainType> types;      // distinct, merged order
    std::vector<std::size_t> mult;     // multiplicities r_i
    std::vector<std::size_t> m_sizes;  // m_i = r_i if p_i = 1 else 0
    std::vector<std::size_t> n_sizes;  // n_i = r_i if q_i = t else 0
    std::optional<std::size_t> coupled_index;  // position of (1, t)
};

struct ChainSystem {
    int t = 0;
    std::vector<int> dims;
    std::vector<Chain> chains;  // sorted by (merged type order, discovery id)
    TransformShape shape;

    // chain indices alive at each space, in basis-column order
    std::vector<std::vector<std::size_t>> space_chains;

    Matrix basis(int space) const {
        const std::size_t n = static_cast<std::size_t>(dims[static_cast<std::size_t>(space - 1)]);
        const auto& idx = space_chains[static_cast<std::size_t>(space - 1)];
        Matrix b(n, idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const Matrix& v = chains[idx[j]].at(space);
            for (std::size_t i = 0; i < n; ++i) b(i, j) = v(i, 0);
        }
        return b;
    }

    std::map<ChainType, std::size_t> type_multiset() const {
        std::map<ChainType, std::size_t> m;
        for (const auto& c : chains) ++m[ChainType{c.p, c.q}];
        return m;
    }
};

namespace detail {

// Merge the two boundary orderings into one total order over all distinct
// types; free pairs break ties lexicographically by (p, q).
inline std::vector<ChainType> merged_type_order(const CycleSpec& c,
                                                const std::map<ChainType, std::size_t>& multiset) {
    std::vector<ChainType> types;
    for (const auto& [ty, mult] : multiset) types.push_back(ty);
    if (types.empty()) return types;
    const int t = c.t;

    std::vector<int> p1_qs, qt_ps;
    for (const auto& ty : types) {
        if (ty.p == 1) p1_qs.push_back(ty.q);
        if (ty.q == t) qt_ps.push_back(ty.p);
    }
    std::vector<int> order1 = end_class_order(c, p1_qs);    // types (1, q)
    std::vector<int> order2 = class_order_at(c, qt_ps, t);  // types (p, t)

    auto index_of = [&](const ChainType& ty) {
        return static_cast<std::size_t>(std::lower_bound(types.begin(), types.end(), ty) -
                                        types.begin());
    };
    std::vector<std::vector<std::size_t>> succ(types.size());
    std::vector<std::size_t> indeg(types.size(), 0);
    std::sort(types.begin(), types.end());
    auto add_edge = [&](const ChainType& a, const ChainType& b) {
        succ[index_of(a)].push_back(index_of(b));
        ++indeg[index_of(b)];
    };
    for (std::size_t i = 0; i + 1 < order1.size(); ++i)
        add_edge(ChainType{1, order1[i]}, ChainType{1, order1[i + 1]});
    for (std::size_t i = 0; i + 1 < order2.size(); ++i)
        add_edge(ChainType{order2[i], t}, ChainType{order2[i + 1], t});

    // Kahn with lexicographic tie-break.
    std::vector<ChainType> out;
    std::vector<bool> done(types.size(), false);
    while (out.size() < types.size()) {
        std::size_t pick = types.size();
        for (std::size_t i = 0; i < types.size(); ++i)
            if (!done[i] && indeg[i] == 0 && (pick == types.size() || types[i] < types[pick]))
                pick = i;
        done[pick] = true;
        out.push_back(types[pick]);
        for (std::size_t s : succ[pick]) --indeg[s];
    }
    return out;
}

}  // namespace detail

// Chain decomposition of the acyclic part of a normalized cycle.
inline ChainSystem decompose_chain(const NormalizedCycle& nc, const Tolerance& tol) {
    const CycleSpec& c = nc.cycle;
    for (int e = 1; e <= c.t - 1; ++e)
        if (c.edge(e).semilinear)
            throw CycleError("decompose_chain: edges 1..t-1 must be linear");

    std::vector<Chain> chains;
    std::vector<std::size_t> alive;  // indices into chains, frontier = current space

    const std::size_t n1 = static_cast<std::size_t>(c.dim(1));
    for (std::size_t j = 0; j < n1; ++j) {
        Chain ch;
        ch.p = 1;
        ch.q = 1;
        Matrix e(n1, 1);
        e(j, 0) = Scalar(1.0);
        ch.vecs.push_back(e);
        alive.push_back(chains.size());
        chains.push_back(std::move(ch));
    }

    for (int i = 1; i <= c.t - 1; ++i) {
        const EdgeSpec& ed = c.edge(i);
        const bool fwd = edge_forward(c, i);
        const Matrix& a = ed.matrix;
        const double a_scale = std::max(a.frobenius_norm(), 1e-300);
        const std::size_t n_next = static_cast<std::size_t>(c.dim(i + 1));

        // donor-before-receiver processing order
        std::vector<int> present;
        for (std::size_t ci : alive) present.push_back(chains[ci].p);
        std::vector<int> order = class_order_at(c, present, i);
        auto class_rank = [&](int p) {
            return static_cast<std::size_t>(std::find(order.begin(), order.end(), p) -
                                            order.begin());
        };
        std::stable_sort(alive.begin(), alive.end(), [&](std::size_t x, std::size_t y) {
            return class_rank(chains[x].p) < class_rank(chains[y].p);
        });

        std::vector<std::size_t> next_alive;

        if (fwd) {
            std::vector<std::size_t> accepted;
            Matrix w_acc(n_next, 0);
            for (std::size_t ci : alive) {
                Chain& ch = chains[ci];
                Matrix w = a * ch.at(i);
                if (w_acc.cols() > 0) {
                    Matrix x = solve_lstsq(w_acc, w);
                    for (std::size_t d = 0; d < accepted.size(); ++d)
                        if (std::abs(x(d, 0)) > 0.0) donate(ch, chains[accepted[d]], -x(d, 0));
                    w = w - w_acc * x;
                }
                if (w.frobenius_norm() > tol.eps * a_scale) {
                    const double s = 1.0 / w.frobenius_norm();
                    scale_chain(ch, Scalar(s));
                    w = Scalar(s) * w;
                    ch.q = i + 1;
                    ch.vecs.push_back(w);
                    w_acc = hstack(w_acc, w);
                    accepted.push_back(ci);
                    next_alive.push_back(ci);
                }  // else the chain ends at i
            }
            // vectors of V_{i+1} outside the image start fresh chains
            Matrix comp = nullspace(w_acc.adjoint(), tol);
            for (std::size_t j = 0; j < comp.cols(); ++j) {
                Chain ch;
                ch.p = i + 1;
                ch.q = i + 1;
                ch.vecs.push_back(comp.col(j));
                next_alive.push_back(chains.size());
                chains.push_back(std::move(ch));
            }
        } else {
            Matrix img = column_space(a, tol);
            std::vector<std::size_t> processed;
            for (std::size_t ci : alive) {
                Chain& ch = chains[ci];
                Matrix sys(static_cast<std::size_t>(c.dim(i)), processed.size() + img.cols());
                for (std::size_t d = 0; d < processed.size(); ++d) {
                    const Matrix& v = chains[processed[d]].at(i);
                    for (std::size_t r = 0; r < sys.rows(); ++r) sys(r, d) = v(r, 0);
                }
                for (std::size_t jj = 0; jj < img.cols(); ++jj)
                    for (std::size_t r = 0; r < sys.rows(); ++r)
                        sys(r, processed.size() + jj) = img(r, jj);
                bool hit = false;
                if (sys.cols() > 0) {
                    Matrix y = solve_lstsq(sys, ch.at(i));
                    Matrix resid = ch.at(i) - sys * y;
                    if (resid.frobenius_norm() <= tol.eps * std::max(1.0, ch.at(i).frobenius_norm())) {
                        for (std::size_t d = 0; d < processed.size(); ++d)
                            if (std::abs(y(d, 0)) > 0.0) donate(ch, chains[processed[d]], -y(d, 0));
                        hit = true;
                    }
                }
                if (hit) {
                    Matrix u = solve_lstsq(a, ch.at(i));
                    ch.q = i + 1;
                    ch.vecs.push_back(u);
                    next_alive.push_back(ci);
                }
                processed.push_back(ci);
            }
            Matrix ker = nullspace(a, tol);
            for (std::size_t j = 0; j < ker.cols(); ++j) {
                Chain ch;
                ch.p = i + 1;
                ch.q = i + 1;
                ch.vecs.push_back(ker.col(j));
                next_alive.push_back(chains.size());
                chains.push_back(std::move(ch));
            }
        }
        alive = std::move(next_alive);
    }

    // Assemble the system: merge the boundary orderings, sort chains, index spaces.
    ChainSystem sys;
    sys.t = c.t;
    sys.dims = c.dims;
    std::map<ChainType, std::size_t> multiset;
    for (const auto& ch : chains) ++multiset[ChainType{ch.p, ch.q}];
    std::vector<ChainType> order = detail::merged_type_order(c, multiset);

    auto type_rank = [&](const Chain& ch) {
        ChainType ty{ch.p, ch.q};
        return static_cast<std::size_t>(
            std::find(order.begin(), order.end(), ty) - order.begin());
    };
    std::vector<std::size_t> perm(chains.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) {
        return type_rank(chains[x]) < type_rank(chains[y]);
    });
    for (std::size_t i : perm) sys.chains.push_back(std::move(chains[i]));

    sys.shape.types = order;
    for (const auto& ty : order) {
        const std::size_t r = multiset.at(ty);
        sys.shape.mult.push_back(r);
        sys.shape.m_sizes.push_back(ty.p == 1 ? r : 0);
        sys.shape.n_sizes.push_back(ty.q == c.t ? r : 0);
        if (ty.p == 1 && ty.q == c.t)
            sys.shape.coupled_index = sys.shape.types.size() - 1;
    }
    sys.space_chains.assign(static_cast<std::size_t>(c.t), {});
    for (std::size_t ci = 0; ci < sys.chains.size(); ++ci)
        for (int k = sys.chains[ci].p; k <= sys.chains[ci].q; ++k)
            sys.space_chains[static_cast<std::size_t>(k - 1)].push_back(ci);
    return sys;
}

}  // namespace cyclecanon
