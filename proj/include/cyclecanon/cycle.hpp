#pragma once

// Cycle data model: t complex vector spaces V_1 .. V_t arranged in a ring,
// edge i joining V_i and V_{i+1} (indices mod t, so edge t joins V_t and V_1).
// Every edge carries its own direction and a linear/semilinear flag.
//
// Matrix conventions: for a linear map, [Au]_f = M [u]_e; for a semilinear
// map, [Au]_f = conj(M [u]_e). Spaces are 1-indexed throughout to match the
// ring arithmetic; matrices of an edge have rows = dim(head), cols = dim(tail).

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace cyclecanon {

struct CycleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeMismatch : CycleError {
    using CycleError::CycleError;
};
struct BadIndex : CycleError {
    using CycleError::CycleError;
};
struct NonFiniteEntry : CycleError {
    using CycleError::CycleError;
};
struct LengthMismatch : CycleError {
    using CycleError::CycleError;
};
struct InconsistentKind : CycleError {
    using CycleError::CycleError;
};
struct SingularMap : CycleError {
    using CycleError::CycleError;
};
struct TooLarge : CycleError {
    using CycleError::CycleError;
};

struct EdgeSpec {
    int index = 0;        // 1..t
    int tail = 0;         // domain space
    int head = 0;         // codomain space
    bool semilinear = false;
    Matrix matrix;        // rows = dim(head), cols = dim(tail)
};

struct CycleSpec {
    int t = 0;
    std::vector<int> dims;        // dims[k-1] = dim V_k
    std::vector<EdgeSpec> edges;  // edges[i-1] has index i

    int dim(int space) const { return dims[static_cast<std::size_t>(space - 1)]; }
    const EdgeSpec& edge(int i) const { return edges[static_cast<std::size_t>(i - 1)]; }
    EdgeSpec& edge(int i) { return edges[static_cast<std::size_t>(i - 1)]; }

    int next_space(int k) const { return k == t ? 1 : k + 1; }
    int prev_space(int k) const { return k == 1 ? t : k - 1; }
};

// Validated view; constructing one is the single entry point for the engine.
struct ValidatedCycle {
    CycleSpec spec;
};

inline ValidatedCycle validate(const CycleSpec& raw) {
    if (raw.t < 1) throw BadIndex("cycle length t must be >= 1");
    if (static_cast<int>(raw.dims.size()) != raw.t)
        throw BadIndex("dims must list exactly t dimensions");
    for (int d : raw.dims)
        if (d < 0) throw BadIndex("space dimensions must be nonnegative");
    if (static_cast<int>(raw.edges.size()) != raw.t)
        throw BadIndex("cycle must carry exactly t edges");
    for (int i = 1; i <= raw.t; ++i) {
        const EdgeSpec& e = raw.edges[static_cast<std::size_t>(i - 1)];
        if (e.index != i) throw BadIndex("edge " + std::to_string(i) + ": index out of order");
        const int a = i;
        const int b = (i == raw.t) ? 1 : i + 1;
        const bool fwd = (e.tail == a && e.head == b);
        const bool bwd = (e.tail == b && e.head == a);
        // t = 1 loop: tail = head = 1 satisfies both.
        if (!fwd && !bwd)
            throw BadIndex("edge " + std::to_string(i) + ": must join spaces " +
                           std::to_string(a) + " and " + std::to_string(b));
        const std::size_t want_rows = static_cast<std::size_t>(raw.dims[e.head - 1]);
        const std::size_t want_cols = static_cast<std::size_t>(raw.dims[e.tail - 1]);
        if (e.matrix.rows() != want_rows || e.matrix.cols() != want_cols)
            throw ShapeMismatch("edge " + std::to_string(i) + ": expected " +
                                std::to_string(want_rows) + "x" + std::to_string(want_cols) +
                                ", got " + std::to_string(e.matrix.rows()) + "x" +
                                std::to_string(e.matrix.cols()));
        if (!e.matrix.all_finite())
            throw NonFiniteEntry("edge " + std::to_string(i) + ": non-finite entry");
    }
    return ValidatedCycle{raw};
}

// Per-position block-diagonal sum of two matrix sequences.
inline std::vector<Matrix> direct_sum(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    if (a.size() != b.size()) throw LengthMismatch("direct_sum: sequence lengths differ");
    std::vector<Matrix> r;
    r.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r.push_back(direct_sum(a[i], b[i]));
    return r;
}

struct ComposedMap {
    Matrix matrix;
    bool semilinear = false;
};

// Composition calculus for oriented maps: apply `first`, then `second`.
// The composite's flag is the XOR of the operand flags; the conjugate of the
// second factor appears exactly when the first factor is semilinear.
inline ComposedMap compose(const EdgeSpec& first, const EdgeSpec& second) {
    if (first.head != second.tail)
        throw ShapeMismatch("compose: head of first (" + std::to_string(first.head) +
                            ") is not tail of second (" + std::to_string(second.tail) + ")");
    if (second.matrix.cols() != first.matrix.rows())
        throw ShapeMismatch("compose: matrix shapes incompatible");
    const Matrix b = first.semilinear ? second.matrix.conj() : second.matrix;
    return ComposedMap{b * first.matrix, first.semilinear != second.semilinear};
}

}  // namespace cyclecanon
