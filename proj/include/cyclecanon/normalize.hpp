#pragma once

// Gauge normalization of a cycle: conjugate spaces until edges 1..t-1 are
// linear, then renumber in reverse order if edge t points into V_1, so that
// edge t maps V_1 -> V_t. The record carries everything needed to pull
// bases and decompositions back to the original numbering.
//
// Conjugating space V_k replaces it by the space with the same vectors and
// c ∘ v := conj(c) v. Both incident edges flip their linearity flag; the
// edge whose tail is V_k has its matrix conjugated entrywise, the edge whose
// head is V_k keeps its matrix. For t = 1 both rules fire on the loop edge:
// the flag flips twice and the matrix is conjugated.

#include <set>
#include <vector>

#include "cycle.hpp"

namespace cyclecanon {

struct NormalizationRecord {
    std::set<int> conjugated_spaces;  // original numbering
    bool reversed = false;
    int dashed_parity = 0;  // semilinear edge count of the original cycle, mod 2
};

struct NormalizedCycle {
    CycleSpec cycle;
    NormalizationRecord record;
};

inline CycleSpec conjugate_space(const CycleSpec& c, int k) {
    if (k < 1 || k > c.t) throw BadIndex("conjugate_space: space index out of range");
    CycleSpec r = c;
    if (c.t == 1) {
        r.edge(1).matrix = r.edge(1).matrix.conj();
        return r;
    }
    const int e_in = (k == 1) ? c.t : k - 1;  // edge joining V_{k-1}, V_k
    const int e_out = k;                      // edge joining V_k, V_{k+1}
    for (int e : {e_in, e_out}) {
        EdgeSpec& ed = r.edge(e);
        ed.semilinear = !ed.semilinear;
        if (ed.tail == k) ed.matrix = ed.matrix.conj();
    }
    return r;
}

// Renumber spaces i -> t+1-i. Edge j (j < t) becomes edge t-j with matrix and
// flag untouched; edge t stays in place with tail/head labels swapped to the
// new numbering.
inline CycleSpec reverse_renumber(const CycleSpec& c) {
    CycleSpec r;
    r.t = c.t;
    r.dims.resize(c.dims.size());
    auto remap = [&](int s) { return c.t + 1 - s; };
    for (int k = 1; k <= c.t; ++k) r.dims[static_cast<std::size_t>(remap(k) - 1)] = c.dim(k);
    r.edges.resize(c.edges.size());
    for (int j = 1; j <= c.t; ++j) {
        const EdgeSpec& old_e = c.edge(j);
        const int new_index = (j == c.t) ? c.t : c.t - j;
        EdgeSpec e = old_e;
        e.index = new_index;
        e.tail = remap(old_e.tail);
        e.head = remap(old_e.head);
        r.edge(new_index) = e;
    }
    return r;
}

inline int count_semilinear(const CycleSpec& c) {
    int n = 0;
    for (const auto& e : c.edges) n += e.semilinear ? 1 : 0;
    return n;
}

inline NormalizedCycle normalize(const ValidatedCycle& vc) {
    const CycleSpec& orig = vc.spec;
    NormalizedCycle out;
    out.record.dashed_parity = count_semilinear(orig) % 2;
    CycleSpec cur = orig;

    if (orig.t > 1) {
        // Repeat: find the first semilinear edge among 1..t-1, say edge k-1,
        // and conjugate V_k. The first semilinear index strictly advances.
        for (;;) {
            int first = 0;
            for (int e = 1; e <= cur.t - 1; ++e)
                if (cur.edge(e).semilinear) {
                    first = e;
                    break;
                }
            if (first == 0) break;
            const int k = first + 1;
            cur = conjugate_space(cur, k);
            if (out.record.conjugated_spaces.count(k))
                out.record.conjugated_spaces.erase(k);
            else
                out.record.conjugated_spaces.insert(k);
        }
        if (cur.edge(cur.t).head == 1) {
            cur = reverse_renumber(cur);
            out.record.reversed = true;
        }
    }
    out.cycle = cur;
    return out;
}

// Undo a normalization: reverse first (it was applied last), then re-apply
// the recorded conjugations (each is an involution).
inline CycleSpec denormalize(const NormalizedCycle& nc) {
    CycleSpec cur = nc.cycle;
    if (nc.record.reversed) cur = reverse_renumber(cur);
    for (int k : nc.record.conjugated_spaces) cur = conjugate_space(cur, k);
    return cur;
}

}  // namespace cyclecanon
