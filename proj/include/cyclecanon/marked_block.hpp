#pragma once

// The block matrix problem of the A_t strip structure: reduce a
// strip-partitioned matrix under
//   M  ->  S^{-1} M R        (full corner crossing, or no crossing)
//   M  ->  conj(S)^{-1} M R  (dashed corner crossing)
// where R and S are upper block triangular for the given strip orders and
// their diagonal blocks coincide at the crossed position, so the crossed
// block moves by similarity (full cross) or consimilarity (dashed cross).
//
// The scan picks the lowest nonzero block of the first nonzero vertical
// strip. An uncrossed pivot is rank-normalized to [[I,0],[0,0]], its pivot
// strips cleared against the rest and retired (Case 1). A crossed pivot is
// canonicalized; the nonsingular part retires as a finished crossed summand,
// and the nilpotent part becomes a "tower": the Jordan superdiagonal
// identities retire as welds, the kernel/cokernel tips stay active, and the
// crossed residual one level up starts out zero (Case 2). Any transformation
// touching a tower acts on all of its levels at once, with conjugate
// staggering when the crossing is dashed; that is what keeps retired welds
// exact, and it makes the residual of a height-H tower move by similarity
// for even H and consimilarity for odd H under a dashed crossing. A tower
// whose residual later regains content is collapsed back into a single
// block and recanonicalized.
//
// Only instances with at most one crossed block are supported. That covers
// the coupled (1,t) corner produced by the chain decomposition, the only
// pattern the rest of the engine generates.

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "matrix.hpp"
#include "numerics.hpp"
#include "spectral.hpp"

namespace cyclecanon {

enum class CrossKind { Full, Dashed };

struct MarkedBlockMatrix {
    std::vector<std::size_t> row_strips, col_strips;  // sizes, zeros allowed
    Matrix entries;
    struct Crossing {
        std::size_t row_strip, col_strip;
        CrossKind kind;
    };
    std::vector<Crossing> crossings;
};

struct BlockReductionResult {
    enum class Kind { NonsingularCrossed, ZeroOne } kind;
    Matrix block;  // canonical nonsingular content, or the 0/1 component matrix
    CrossKind cross = CrossKind::Full;
};

struct RegularPiece {
    std::vector<std::size_t> rows, cols;  // global indices, canonical order
    Matrix content;                       // exact canonical nonsingular block
    CrossKind mode;                       // Full: similarity; Dashed: consimilarity
};

struct BlockReduction {
    Matrix final_form;  // exact canonical content on the original index set
    Matrix r_transform;
    Matrix s_transform;
    std::vector<BlockReductionResult> summands;
    std::vector<RegularPiece> regular;
    std::vector<std::pair<std::size_t, std::size_t>> welds;  // (row, col) 1-entries
    bool dashed = false;  // final = conj(S)^{-1} M R when true
    bool ill_conditioned = false;
};

namespace mbm {

using Idx = std::vector<std::size_t>;

struct Sub {
    Idx idx;
    std::size_t parent = 0;
    bool active = true;
};

struct Tower {
    std::vector<std::size_t> col_subs, row_subs;  // level 1..H (sub ids)
    bool base_active = true, tip_active = true;
    std::size_t height() const { return col_subs.size(); }
};

// A retired identity block at (rows x cols). The invariant: the block is
// exactly I, and the rows/columns are zero everywhere else. Staggered tower
// compensations can disturb all three parts; they are repaired through
// whichever side is free and through the partner side.
struct WeldGroup {
    Idx rows, cols;
    bool rows_coupled = false, cols_coupled = false;
};

class Reducer {
  public:
    Reducer(const MarkedBlockMatrix& in, const Tolerance& tol) : tol_(tol), m_(in.entries) {
        if (in.crossings.size() > 1)
            throw CycleError("reduce_marked: at most one crossed block is supported");
        nrows_ = m_.rows();
        ncols_ = m_.cols();
        std::size_t rsum = 0, csum = 0;
        for (std::size_t s : in.row_strips) rsum += s;
        for (std::size_t s : in.col_strips) csum += s;
        if (rsum != nrows_ || csum != ncols_)
            throw CycleError("reduce_marked: strip sizes do not match the matrix");
        r_acc_ = identity(ncols_);
        w_acc_ = identity(nrows_);
        scale_ = std::max(1.0, m_.frobenius_norm());
        zero_tol_ = tol_.eps * scale_;
        residual_tol_ = std::max(zero_tol_, 3.0 * tol_.cluster_eps * scale_);

        std::size_t off = 0;
        for (std::size_t p = 0; p < in.col_strips.size(); ++p) {
            Sub s;
            s.parent = p;
            for (std::size_t j = 0; j < in.col_strips[p]; ++j) s.idx.push_back(off + j);
            off += in.col_strips[p];
            s.active = !s.idx.empty();
            col_subs_.push_back(std::move(s));
        }
        off = 0;
        for (std::size_t p = 0; p < in.row_strips.size(); ++p) {
            Sub s;
            s.parent = p;
            for (std::size_t j = 0; j < in.row_strips[p]; ++j) s.idx.push_back(off + j);
            off += in.row_strips[p];
            s.active = !s.idx.empty();
            row_subs_.push_back(std::move(s));
        }
        if (!in.crossings.empty()) {
            const auto& c = in.crossings.front();
            if (in.row_strips[c.row_strip] != in.col_strips[c.col_strip])
                throw CycleError("reduce_marked: crossed block is not square");
            dashed_ = (c.kind == CrossKind::Dashed);
            coupled_col_parent_ = c.col_strip;
            coupled_row_parent_ = c.row_strip;
            if (in.row_strips[c.row_strip] > 0) {
                Tower t;
                t.col_subs = {c.col_strip};
                t.row_subs = {c.row_strip};
                towers_.push_back(t);
            }
        }
    }

    BlockReduction run() {
        for (std::size_t guard = 0; guard < 64 * (nrows_ + ncols_ + 4); ++guard) {
            cleanup_welds();
            auto target = find_pivot();
            if (!target) return finish();
            auto [r, q] = *target;
            auto ti = residual_tower(r, q);
            if (ti)
                case_two(*ti);
            else
                case_one(r, q);
        }
        throw CycleError("reduce_marked: iteration guard exceeded");
    }

  private:
    Tolerance tol_;
    Matrix m_, r_acc_, w_acc_;
    std::size_t nrows_ = 0, ncols_ = 0;
    double scale_ = 1.0, zero_tol_ = 0.0, residual_tol_ = 0.0;
    std::vector<Sub> col_subs_, row_subs_;
    std::vector<Tower> towers_;
    std::optional<std::size_t> coupled_col_parent_, coupled_row_parent_;
    bool dashed_ = false;
    bool ill_ = false;
    std::vector<RegularPiece> regular_;
    std::vector<WeldGroup> weld_groups_;

    // ---- elementary transform applications ----

    void apply_col_mix(const Idx& idx, const Matrix& v) {
        if (idx.empty()) return;
        auto mix = [&](Matrix& m) {
            Matrix slice(m.rows(), idx.size());
            for (std::size_t j = 0; j < idx.size(); ++j)
                for (std::size_t i = 0; i < m.rows(); ++i) slice(i, j) = m(i, idx[j]);
            Matrix out = slice * v;
            for (std::size_t j = 0; j < idx.size(); ++j)
                for (std::size_t i = 0; i < m.rows(); ++i) m(i, idx[j]) = out(i, j);
        };
        mix(m_);
        mix(r_acc_);
    }

    void apply_row_mix(const Idx& idx, const Matrix& u) {
        if (idx.empty()) return;
        auto mix = [&](Matrix& m) {
            Matrix slice(idx.size(), m.cols());
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < m.cols(); ++j) slice(i, j) = m(idx[i], j);
            Matrix out = u * slice;
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < m.cols(); ++j) m(idx[i], j) = out(i, j);
        };
        mix(m_);
        mix(w_acc_);
    }

    // cols[to] += cols[from] * c
    void apply_col_add(const Idx& from, const Idx& to, const Matrix& c) {
        if (from.empty() || to.empty()) return;
        auto add = [&](Matrix& m) {
            for (std::size_t i = 0; i < m.rows(); ++i)
                for (std::size_t jt = 0; jt < to.size(); ++jt) {
                    Scalar s(0.0);
                    for (std::size_t jf = 0; jf < from.size(); ++jf)
                        s += m(i, from[jf]) * c(jf, jt);
                    m(i, to[jt]) += s;
                }
        };
        add(m_);
        add(r_acc_);
    }

    // rows[to] += c * rows[from]
    void apply_row_add(const Idx& from, const Idx& to, const Matrix& c) {
        if (from.empty() || to.empty()) return;
        auto add = [&](Matrix& m) {
            for (std::size_t j = 0; j < m.cols(); ++j)
                for (std::size_t it = 0; it < to.size(); ++it) {
                    Scalar s(0.0);
                    for (std::size_t jf = 0; jf < from.size(); ++jf)
                        s += c(it, jf) * m(from[jf], j);
                    m(to[it], j) += s;
                }
        };
        add(m_);
        add(w_acc_);
    }

    // ---- coupled (tower) operations ----

    // Column mix V staggered through all levels; the coupled rows absorb the
    // inverse. Columns of level b (1-based) get conj^{b-1}(V); rows of level
    // b get conj^{b-1+dashed}(V)^{-1}.
    void tower_col_mix(std::size_t ti, const Matrix& v) {
        const Matrix vinv = inverse(v);
        const std::size_t h = towers_[ti].height();
        for (std::size_t b = 0; b < h; ++b) {
            const Matrix vb = (dashed_ && b % 2 == 1) ? v.conj() : v;
            apply_col_mix(col_subs_[towers_[ti].col_subs[b]].idx, vb);
            Matrix ub = vinv;
            if (dashed_ && (b + 1) % 2 == 1) ub = vinv.conj();
            apply_row_mix(row_subs_[towers_[ti].row_subs[b]].idx, ub);
        }
    }

    // Row mix U on the tip, staggered through all levels.
    void tower_row_mix(std::size_t ti, const Matrix& u) {
        const std::size_t h = towers_[ti].height();
        Matrix v;
        if (!dashed_)
            v = inverse(u);
        else
            v = inverse((h % 2 == 1) ? u.conj() : u);
        tower_col_mix(ti, v);
    }

    // cols of `to` receive cols of `from`, base-anchored; coupled rows
    // compensate. Needs height(from) >= height(to).
    void tower_col_add(std::size_t from, std::size_t to, const Matrix& c) {
        const Tower &tf = towers_[from], &tt = towers_[to];
        if (tf.height() < tt.height())
            throw CycleError("marked-block internal: tower column donation upward");
        for (std::size_t b = 0; b < tt.height(); ++b) {
            const Matrix cb = (dashed_ && b % 2 == 1) ? c.conj() : c;
            apply_col_add(col_subs_[tf.col_subs[b]].idx, col_subs_[tt.col_subs[b]].idx, cb);
            const Matrix rb = dashed_ ? cb.conj() : cb;
            apply_row_add(row_subs_[tt.row_subs[b]].idx, row_subs_[tf.row_subs[b]].idx,
                          Scalar(-1.0) * rb);
        }
    }

    // rows of `to` receive rows of `from`, tip-anchored; coupled cols
    // compensate. Needs height(from) >= height(to).
    void tower_row_add(std::size_t from, std::size_t to, const Matrix& c) {
        const Tower &tf = towers_[from], &tt = towers_[to];
        if (tf.height() < tt.height())
            throw CycleError("marked-block internal: tower row donation upward");
        const std::size_t hf = tf.height(), ht = tt.height();
        for (std::size_t b = 0; b < ht; ++b) {
            const Matrix cb = (dashed_ && b % 2 == 1) ? c.conj() : c;
            apply_row_add(row_subs_[tf.row_subs[hf - 1 - b]].idx,
                          row_subs_[tt.row_subs[ht - 1 - b]].idx, cb);
            const Matrix rb = dashed_ ? cb.conj() : cb;
            apply_col_add(col_subs_[tt.col_subs[ht - 1 - b]].idx,
                          col_subs_[tf.col_subs[hf - 1 - b]].idx, Scalar(-1.0) * rb);
        }
    }

    // ---- structure bookkeeping ----

    bool coupled_col(const Sub& s) const {
        return coupled_col_parent_ && s.parent == *coupled_col_parent_;
    }
    bool coupled_row(const Sub& s) const {
        return coupled_row_parent_ && s.parent == *coupled_row_parent_;
    }

    std::optional<std::size_t> tower_with_tip(std::size_t row_sub) const {
        for (std::size_t ti = 0; ti < towers_.size(); ++ti)
            if (towers_[ti].tip_active && towers_[ti].row_subs.back() == row_sub) return ti;
        return std::nullopt;
    }
    std::optional<std::size_t> tower_with_base(std::size_t col_sub) const {
        for (std::size_t ti = 0; ti < towers_.size(); ++ti)
            if (towers_[ti].base_active && towers_[ti].col_subs.front() == col_sub) return ti;
        return std::nullopt;
    }
    std::optional<std::size_t> residual_tower(std::size_t row_sub, std::size_t col_sub) const {
        auto ti = tower_with_base(col_sub);
        if (ti && towers_[*ti].tip_active && towers_[*ti].row_subs.back() == row_sub) return ti;
        return std::nullopt;
    }

    std::size_t n_col_parents() const {
        std::size_t n = 0;
        for (const auto& s : col_subs_) n = std::max(n, s.parent + 1);
        return n;
    }
    std::size_t n_row_parents() const {
        std::size_t n = 0;
        for (const auto& s : row_subs_) n = std::max(n, s.parent + 1);
        return n;
    }

    std::vector<std::size_t> active_col_order() const {
        std::vector<std::size_t> order;
        for (std::size_t p = 0; p < n_col_parents(); ++p) {
            if (coupled_col_parent_ && p == *coupled_col_parent_) {
                std::vector<std::size_t> ts;
                for (std::size_t ti = 0; ti < towers_.size(); ++ti)
                    if (towers_[ti].base_active) ts.push_back(ti);
                std::stable_sort(ts.begin(), ts.end(), [&](std::size_t a, std::size_t b) {
                    return towers_[a].height() > towers_[b].height();
                });
                for (std::size_t ti : ts)
                    if (col_subs_[towers_[ti].col_subs.front()].active)
                        order.push_back(towers_[ti].col_subs.front());
            } else {
                for (std::size_t si = 0; si < col_subs_.size(); ++si)
                    if (col_subs_[si].active && col_subs_[si].parent == p) order.push_back(si);
            }
        }
        return order;
    }

    std::vector<std::size_t> active_row_order() const {
        std::vector<std::size_t> order;
        for (std::size_t p = 0; p < n_row_parents(); ++p) {
            if (coupled_row_parent_ && p == *coupled_row_parent_) {
                std::vector<std::size_t> ts;  // shortest first
                for (std::size_t ti = 0; ti < towers_.size(); ++ti)
                    if (towers_[ti].tip_active) ts.push_back(ti);
                std::stable_sort(ts.begin(), ts.end(), [&](std::size_t a, std::size_t b) {
                    return towers_[a].height() < towers_[b].height();
                });
                for (std::size_t ti : ts)
                    if (row_subs_[towers_[ti].row_subs.back()].active)
                        order.push_back(towers_[ti].row_subs.back());
            } else {
                for (std::size_t si = 0; si < row_subs_.size(); ++si)
                    if (row_subs_[si].active && row_subs_[si].parent == p) order.push_back(si);
            }
        }
        return order;
    }

    Matrix block(const Idx& rows, const Idx& cols) const {
        Matrix b(rows.size(), cols.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j) b(i, j) = m_(rows[i], cols[j]);
        return b;
    }

    double block_max(const Idx& rows, const Idx& cols) const {
        double mx = 0.0;
        for (std::size_t i : rows)
            for (std::size_t j : cols) mx = std::max(mx, std::abs(m_(i, j)));
        return mx;
    }

    std::optional<std::pair<std::size_t, std::size_t>> find_pivot() const {
        const auto cols = active_col_order();
        const auto rows = active_row_order();
        for (std::size_t q : cols) {
            std::optional<std::size_t> low;
            for (std::size_t r : rows) {
                const double mx = block_max(row_subs_[r].idx, col_subs_[q].idx);
                const double cut = residual_tower(r, q) ? residual_tol_ : zero_tol_;
                if (mx > cut) low = r;
            }
            if (low) return std::make_pair(*low, q);
        }
        return std::nullopt;
    }

    // position helpers for legality checks of plain additions
    void check_plain_col_add(std::size_t from_sub, std::size_t to_sub) const {
        const auto &f = col_subs_[from_sub], &t = col_subs_[to_sub];
        if (f.parent != t.parent && f.parent > t.parent)
            throw CycleError("marked-block internal: column addition leftward");
        if (f.parent == t.parent && coupled_col(f))
            throw CycleError("marked-block internal: uncoupled path used inside crossing");
    }
    void check_plain_row_add(std::size_t from_sub, std::size_t to_sub) const {
        const auto &f = row_subs_[from_sub], &t = row_subs_[to_sub];
        if (f.parent != t.parent && f.parent < t.parent)
            throw CycleError("marked-block internal: row addition downward");
        if (f.parent == t.parent && coupled_row(f))
            throw CycleError("marked-block internal: uncoupled path used inside crossing");
    }

    // Restore every weld group: the identity content first (through a free
    // side), then junk in the columns (cleared through the weld rows) and in
    // the rows (cleared through the weld columns). A clear whose direction is
    // inadmissible right now stays deferred; the pivot clears sweep finished
    // structures too, and the exactness check at the end backstops anything
    // that never became clearable.
    void cleanup_welds() {
        for (int sweep = 0; sweep < 4; ++sweep) {
            bool acted = false;
            for (const auto& g : weld_groups_) {
                Matrix b = block(g.rows, g.cols);
                Matrix drift = b - identity(g.rows.size());
                if (drift.max_abs() > 0.5) throw CycleError("marked-block internal: weld lost");
                if (drift.max_abs() > 1e-12 * scale_) {
                    if (!g.rows_coupled)
                        apply_row_mix(g.rows, inverse(b));
                    else if (!g.cols_coupled)
                        apply_col_mix(g.cols, inverse(b));
                    else
                        throw CycleError("marked-block internal: tower weld drifted");
                    acted = true;
                }
                for (std::size_t r : active_row_order()) {
                    Matrix junk = block(row_subs_[r].idx, g.cols);
                    if (junk.max_abs() <= zero_tol_ / 8.0) continue;
                    if (!may_row_donate(g.rows, row_subs_[r])) continue;  // deferred
                    apply_row_add(g.rows, row_subs_[r].idx, Scalar(-1.0) * junk);
                    acted = true;
                }
                for (std::size_t q : active_col_order()) {
                    Matrix junk = block(g.rows, col_subs_[q].idx);
                    if (junk.max_abs() <= zero_tol_ / 8.0) continue;
                    if (!may_col_donate(g.cols, col_subs_[q])) continue;  // deferred
                    apply_col_add(g.cols, col_subs_[q].idx, Scalar(-1.0) * junk);
                    acted = true;
                }
            }
            if (!acted) return;
        }
    }

    // donation rows(from) -> rows(recv): receiver above donor, or an
    // uncoupled shared strip
    bool may_row_donate(const Idx& from, const Sub& recv) const {
        if (from.empty()) return false;
        const std::size_t donor_parent = parent_of_row(from.front());
        if (recv.parent == donor_parent)
            return !(coupled_row_parent_ && recv.parent == *coupled_row_parent_);
        return recv.parent < donor_parent;
    }
    bool may_col_donate(const Idx& from, const Sub& recv) const {
        if (from.empty()) return false;
        const std::size_t donor_parent = parent_of_col(from.front());
        if (recv.parent == donor_parent)
            return !(coupled_col_parent_ && recv.parent == *coupled_col_parent_);
        return recv.parent > donor_parent;
    }

    std::size_t parent_of_row(std::size_t global) const {
        for (const auto& s : row_subs_)
            for (std::size_t i : s.idx)
                if (i == global) return s.parent;
        throw CycleError("marked-block internal: row parent lookup");
    }
    std::size_t parent_of_col(std::size_t global) const {
        for (const auto& s : col_subs_)
            for (std::size_t i : s.idx)
                if (i == global) return s.parent;
        throw CycleError("marked-block internal: col parent lookup");
    }

    std::pair<std::size_t, std::size_t> split_sub(std::vector<Sub>& subs, std::size_t si,
                                                  std::size_t k) {
        Sub a, b;
        a.parent = b.parent = subs[si].parent;
        for (std::size_t i = 0; i < subs[si].idx.size(); ++i)
            (i < k ? a : b).idx.push_back(subs[si].idx[i]);
        subs[si].active = false;
        b.active = !b.idx.empty();
        subs.push_back(std::move(a));
        subs.push_back(std::move(b));
        return {subs.size() - 2, subs.size() - 1};
    }

    // split a tower width-wise into (first k, rest); returns their ids
    std::pair<std::size_t, std::size_t> split_tower(std::size_t ti, std::size_t k) {
        Tower a, b;
        a.base_active = b.base_active = towers_[ti].base_active;
        a.tip_active = b.tip_active = towers_[ti].tip_active;
        const Tower old = towers_[ti];
        for (std::size_t lvl = 0; lvl < old.height(); ++lvl) {
            auto [c1, c2] = split_sub(col_subs_, old.col_subs[lvl], k);
            auto [r1, r2] = split_sub(row_subs_, old.row_subs[lvl], k);
            a.col_subs.push_back(c1);
            b.col_subs.push_back(c2);
            a.row_subs.push_back(r1);
            b.row_subs.push_back(r2);
        }
        // welds recorded on the old index positions stay valid: indices are
        // global and unchanged by the split
        towers_[ti] = a;
        towers_.push_back(b);
        return {ti, towers_.size() - 1};
    }

    void clear_above_and_right(std::size_t r_piv, std::size_t q_piv, const Matrix& pivot_inv) {
        const Idx& pcols = col_subs_[q_piv].idx;
        const Idx& prows = row_subs_[r_piv].idx;
        const auto donor_row_tower = tower_with_tip(r_piv);
        for (std::size_t r : active_row_order()) {
            if (r == r_piv) continue;
            Matrix c = block(row_subs_[r].idx, pcols);
            if (c.max_abs() <= zero_tol_) continue;
            const Matrix coeff = Scalar(-1.0) * (c * pivot_inv);
            const auto recv_tower = tower_with_tip(r);
            if (donor_row_tower && recv_tower)
                tower_row_add(*donor_row_tower, *recv_tower, coeff);
            else {
                check_plain_row_add(r_piv, r);
                apply_row_add(prows, row_subs_[r].idx, coeff);
            }
        }
        // finished weld rows may carry deferred junk in the pivot columns
        for (const auto& g : weld_groups_) {
            Matrix c = block(g.rows, pcols);
            if (c.max_abs() <= zero_tol_) continue;
            if (g.rows.empty() || prows.empty()) continue;
            const std::size_t gp = parent_of_row(g.rows.front());
            const std::size_t dp = row_subs_[r_piv].parent;
            const bool ok = (gp == dp) ? !(coupled_row_parent_ && gp == *coupled_row_parent_)
                                       : gp < dp;
            if (!ok) continue;  // stays deferred; the final check backstops
            apply_row_add(prows, g.rows, Scalar(-1.0) * (c * pivot_inv));
        }
        const auto donor_col_tower = tower_with_base(q_piv);
        for (std::size_t q : active_col_order()) {
            if (q == q_piv) continue;
            Matrix c = block(prows, col_subs_[q].idx);
            if (c.max_abs() <= zero_tol_) continue;
            const Matrix coeff = Scalar(-1.0) * (pivot_inv * c);
            const auto recv_tower = tower_with_base(q);
            if (donor_col_tower && recv_tower)
                tower_col_add(*donor_col_tower, *recv_tower, coeff);
            else {
                check_plain_col_add(q_piv, q);
                apply_col_add(pcols, col_subs_[q].idx, coeff);
            }
        }
        for (const auto& g : weld_groups_) {
            Matrix c = block(prows, g.cols);
            if (c.max_abs() <= zero_tol_) continue;
            if (g.cols.empty() || pcols.empty()) continue;
            const std::size_t gp = parent_of_col(g.cols.front());
            const std::size_t dp = col_subs_[q_piv].parent;
            const bool ok = (gp == dp) ? !(coupled_col_parent_ && gp == *coupled_col_parent_)
                                       : gp > dp;
            if (!ok) continue;
            apply_col_add(pcols, g.cols, Scalar(-1.0) * (pivot_inv * c));
        }
    }

    void case_one(std::size_t r, std::size_t q) {
        Matrix b = block(row_subs_[r].idx, col_subs_[q].idx);
        Eigen::JacobiSVD<EMatrix> svd(to_eigen(b), Eigen::ComputeFullU | Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        std::size_t k = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > zero_tol_) ++k;
        if (k == 0) throw CycleError("marked-block internal: empty pivot");
        EMatrix uh = svd.matrixU().adjoint();
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(k); ++i) uh.row(i) /= sv(i);
        const Matrix urow = from_eigen(uh);
        const Matrix vcol = from_eigen(svd.matrixV());

        const auto rt = tower_with_tip(r);
        const auto qt = tower_with_base(q);
        if (qt)
            tower_col_mix(*qt, vcol);
        else
            apply_col_mix(col_subs_[q].idx, vcol);
        if (rt)
            tower_row_mix(*rt, urow);
        else
            apply_row_mix(row_subs_[r].idx, urow);

        // split off the pivot strips (k = full size: take the whole sub)
        std::size_t r_piv = r, q_piv = q;
        std::optional<std::size_t> rt_piv = rt, qt_piv = qt;
        if (rt) {
            if (k < row_subs_[r].idx.size()) {
                auto [ta, tb] = split_tower(*rt, k);
                (void)tb;
                rt_piv = ta;
            }
            r_piv = towers_[*rt_piv].row_subs.back();
        } else if (k < row_subs_[r].idx.size()) {
            auto [a, b2] = split_sub(row_subs_, r, k);
            (void)b2;
            r_piv = a;
            row_subs_[r_piv].active = true;
        }
        if (qt) {
            auto qt_now = tower_with_base(q);  // id may have changed by the row split? no:
            // the row-tower split does not touch column towers; refetch anyway
            if (k < col_subs_[q].idx.size()) {
                auto [ta, tb] = split_tower(*qt_now, k);
                (void)tb;
                qt_piv = ta;
            } else {
                qt_piv = qt_now;
            }
            q_piv = towers_[*qt_piv].col_subs.front();
        } else if (k < col_subs_[q].idx.size()) {
            auto [a, b2] = split_sub(col_subs_, q, k);
            (void)b2;
            q_piv = a;
            col_subs_[q_piv].active = true;
        }

        clear_above_and_right(r_piv, q_piv, identity(k));

        WeldGroup g;
        g.rows = row_subs_[r_piv].idx;
        g.cols = col_subs_[q_piv].idx;
        g.rows_coupled = coupled_row(row_subs_[r_piv]);
        g.cols_coupled = coupled_col(col_subs_[q_piv]);
        weld_groups_.push_back(std::move(g));
        row_subs_[r_piv].active = false;
        col_subs_[q_piv].active = false;
        if (rt_piv) towers_[*rt_piv].tip_active = false;
        if (qt_piv) towers_[*qt_piv].base_active = false;
    }

    // Collapse a tower into a single-level block; its welds become active
    // content again.
    void rewind(std::size_t ti) {
        Tower& t = towers_[ti];
        Sub ccat, rcat;
        ccat.parent = col_subs_[t.col_subs.front()].parent;
        rcat.parent = row_subs_[t.row_subs.front()].parent;
        std::vector<bool> tower_row(nrows_, false), tower_col(ncols_, false);
        for (std::size_t b = 0; b < t.height(); ++b) {
            for (std::size_t j : col_subs_[t.col_subs[b]].idx) {
                ccat.idx.push_back(j);
                tower_col[j] = true;
            }
            for (std::size_t j : row_subs_[t.row_subs[b]].idx) {
                rcat.idx.push_back(j);
                tower_row[j] = true;
            }
            col_subs_[t.col_subs[b]].active = false;
            row_subs_[t.row_subs[b]].active = false;
        }
        std::erase_if(weld_groups_, [&](const WeldGroup& g) {
            return !g.rows.empty() && tower_row[g.rows.front()] && !g.cols.empty() &&
                   tower_col[g.cols.front()];
        });
        col_subs_.push_back(std::move(ccat));
        row_subs_.push_back(std::move(rcat));
        Tower merged;
        merged.col_subs = {col_subs_.size() - 1};
        merged.row_subs = {row_subs_.size() - 1};
        towers_[ti] = merged;
    }

    void case_two(std::size_t ti) {
        if (towers_[ti].height() >= 2) {
            rewind(ti);
            return;  // the next iteration canonicalizes the merged block
        }
        const Idx bcols = col_subs_[towers_[ti].col_subs.front()].idx;
        const Idx brows = row_subs_[towers_[ti].row_subs.back()].idx;
        const Matrix b = block(brows, bcols);
        const std::size_t w = bcols.size();

        Matrix v;
        std::vector<std::pair<Matrix, CrossKind>> reg_blocks;
        std::vector<std::pair<std::size_t, std::size_t>> jgroups;  // (size z, count w_z) asc z
        std::size_t n0 = 0;
        if (!dashed_) {
            auto sc = similarity_canonical(b, tol_);
            ill_ = ill_ || sc.ill_conditioned;
            const double zcut =
                std::max(tol_.cluster_eps * std::max(1.0, b.frobenius_norm()), 10.0 * zero_tol_);
            v = regroup_similarity(sc, zcut, reg_blocks, jgroups, n0);
        } else {
            auto cc = consimilarity_canonical(b, tol_);
            ill_ = ill_ || cc.ill_conditioned;
            v = regroup_consim(cc, reg_blocks, jgroups, n0);
        }
        tower_col_mix(ti, v);

        std::size_t ti_n = ti;
        std::optional<std::size_t> ti_j;
        if (n0 == 0) {
            ti_j = ti;
        } else if (n0 < w) {
            auto [a, b2] = split_tower(ti, n0);
            ti_n = a;
            ti_j = b2;
        }
        if (n0 > 0) {
            const std::size_t tipn = towers_[ti_n].row_subs.back();
            const std::size_t basen = towers_[ti_n].col_subs.front();
            Matrix ncontent = block(row_subs_[tipn].idx, col_subs_[basen].idx);
            clear_above_and_right(tipn, basen, inverse(ncontent));
            RegularPiece piece;
            piece.rows = row_subs_[tipn].idx;
            piece.cols = col_subs_[basen].idx;
            piece.content = exactify(block(row_subs_[tipn].idx, col_subs_[basen].idx), reg_blocks);
            piece.mode = dashed_ ? CrossKind::Dashed : CrossKind::Full;
            regular_.push_back(std::move(piece));
            row_subs_[tipn].active = false;
            col_subs_[basen].active = false;
            towers_[ti_n].base_active = towers_[ti_n].tip_active = false;
        }

        if (ti_j && !jgroups.empty()) {
            std::size_t cur = *ti_j;
            for (std::size_t g = 0; g < jgroups.size(); ++g) {
                auto [z, wz] = jgroups[g];
                std::size_t mine = cur;
                if (g + 1 < jgroups.size()) {
                    auto [a, b2] = split_tower(cur, z * wz);
                    mine = a;
                    cur = b2;
                }
                restructure_tower(mine, z, wz);
            }
        }
    }

    // Turn a single-level tower whose block is level-major nilpotent
    // canonical (size z, width wz) into a height-z tower, retiring the welds.
    void restructure_tower(std::size_t ti, std::size_t z, std::size_t wz) {
        if (towers_[ti].height() != 1 ||
            col_subs_[towers_[ti].col_subs.front()].idx.size() != z * wz)
            throw CycleError("marked-block internal: restructure shape");
        if (z == 1) {
            const Idx& rr = row_subs_[towers_[ti].row_subs.front()].idx;
            const Idx& cc = col_subs_[towers_[ti].col_subs.front()].idx;
            if (block_max(rr, cc) > residual_tol_)
                throw CycleError("marked-block internal: inert residual above tolerance");
            return;
        }
        const std::size_t csub = towers_[ti].col_subs.front();
        const std::size_t rsub = towers_[ti].row_subs.front();
        Tower nt;
        for (std::size_t lvl = 0; lvl < z; ++lvl) {
            Sub cs, rs;
            cs.parent = col_subs_[csub].parent;
            rs.parent = row_subs_[rsub].parent;
            for (std::size_t j = 0; j < wz; ++j) {
                cs.idx.push_back(col_subs_[csub].idx[lvl * wz + j]);
                rs.idx.push_back(row_subs_[rsub].idx[lvl * wz + j]);
            }
            col_subs_.push_back(std::move(cs));
            row_subs_.push_back(std::move(rs));
            nt.col_subs.push_back(col_subs_.size() - 1);
            nt.row_subs.push_back(row_subs_.size() - 1);
        }
        col_subs_[csub].active = false;
        row_subs_[rsub].active = false;
        towers_[ti] = nt;

        for (std::size_t bb = 0; bb + 1 < z; ++bb) {
            WeldGroup g;
            g.rows = row_subs_[towers_[ti].row_subs[bb]].idx;
            g.cols = col_subs_[towers_[ti].col_subs[bb + 1]].idx;
            g.rows_coupled = g.cols_coupled = true;
            weld_groups_.push_back(std::move(g));
            row_subs_[towers_[ti].row_subs[bb]].active = false;
            col_subs_[towers_[ti].col_subs[bb + 1]].active = false;
        }
        cleanup_welds();  // the new weld rows/columns inherited outside content
    }

    Matrix regroup_similarity(const SimCanonical& sc, double zcut,
                              std::vector<std::pair<Matrix, CrossKind>>& reg_blocks,
                              std::vector<std::pair<std::size_t, std::size_t>>& jgroups,
                              std::size_t& n0) {
        const std::size_t w = sc.transform.rows();
        std::vector<std::size_t> offs;
        std::size_t off = 0;
        for (const auto& [lam, sz] : sc.cls.blocks) {
            offs.push_back(off);
            off += sz;
        }
        std::vector<std::size_t> perm;
        n0 = 0;
        for (std::size_t bi = 0; bi < sc.cls.blocks.size(); ++bi) {
            const auto& [lam, sz] = sc.cls.blocks[bi];
            if (std::abs(lam) > zcut) {
                for (std::size_t j = 0; j < sz; ++j) perm.push_back(offs[bi] + j);
                reg_blocks.emplace_back(jordan_block(lam, sz), CrossKind::Full);
                n0 += sz;
            }
        }
        std::map<std::size_t, std::vector<std::size_t>> by_size;
        for (std::size_t bi = 0; bi < sc.cls.blocks.size(); ++bi) {
            const auto& [lam, sz] = sc.cls.blocks[bi];
            if (std::abs(lam) <= zcut) by_size[sz].push_back(offs[bi]);
        }
        for (const auto& [z, blocks] : by_size) {
            jgroups.emplace_back(z, blocks.size());
            for (std::size_t lvl = 0; lvl < z; ++lvl)
                for (std::size_t b : blocks) perm.push_back(b + lvl);
        }
        if (perm.size() != w) throw CycleError("marked-block internal: regroup");
        Matrix p(w, w);
        for (std::size_t j = 0; j < w; ++j) p(perm[j], j) = Scalar(1.0);
        return sc.transform * p;
    }

    Matrix regroup_consim(const ConsimCanonical& cc,
                          std::vector<std::pair<Matrix, CrossKind>>& reg_blocks,
                          std::vector<std::pair<std::size_t, std::size_t>>& jgroups,
                          std::size_t& n0) {
        const std::size_t w = cc.transform.rows();
        std::size_t off = 0;
        std::vector<std::size_t> t0_offs, t0_sizes;
        for (std::size_t k : cc.cls.type0) {
            t0_offs.push_back(off);
            t0_sizes.push_back(k);
            off += k;
        }
        std::vector<std::size_t> perm;
        n0 = 0;
        for (const auto& [lam, k] : cc.cls.type1) {
            for (std::size_t j = 0; j < k; ++j) perm.push_back(off + j);
            reg_blocks.emplace_back(jordan_block(Scalar(lam), k), CrossKind::Dashed);
            n0 += k;
            off += k;
        }
        for (const auto& [mu, k2] : cc.cls.type2) {
            for (std::size_t j = 0; j < k2; ++j) perm.push_back(off + j);
            reg_blocks.emplace_back(h_block(mu, k2 / 2), CrossKind::Dashed);
            n0 += k2;
            off += k2;
        }
        std::map<std::size_t, std::vector<std::size_t>> by_size;
        for (std::size_t bi = 0; bi < t0_offs.size(); ++bi)
            by_size[t0_sizes[bi]].push_back(t0_offs[bi]);
        for (const auto& [z, bs] : by_size) {
            jgroups.emplace_back(z, bs.size());
            for (std::size_t lvl = 0; lvl < z; ++lvl)
                for (std::size_t b : bs) perm.push_back(b + lvl);
        }
        if (perm.size() != w) throw CycleError("marked-block internal: regroup consim");
        Matrix p(w, w);
        for (std::size_t j = 0; j < w; ++j) p(perm[j], j) = Scalar(1.0);
        return cc.transform * p;
    }

    static Matrix exactify(const Matrix& approx,
                           const std::vector<std::pair<Matrix, CrossKind>>& blocks) {
        Matrix exact(0, 0);
        for (const auto& [b, kind] : blocks) exact = direct_sum(exact, b);
        if (exact.rows() != approx.rows() || exact.cols() != approx.cols())
            throw CycleError("marked-block internal: regular content shape");
        if ((exact - approx).max_abs() > 1e-6 * std::max(1.0, approx.max_abs()))
            throw CycleError("marked-block internal: regular content drifted");
        return exact;
    }

    BlockReduction finish() {
        BlockReduction out;
        out.dashed = dashed_;
        out.regular = regular_;
        out.ill_conditioned = ill_;
        out.r_transform = r_acc_;
        const Matrix winv = inverse(w_acc_);
        out.s_transform = dashed_ ? winv.conj() : winv;

        std::vector<std::pair<std::size_t, std::size_t>> welds_;
        for (const auto& g : weld_groups_)
            for (std::size_t i = 0; i < g.rows.size(); ++i)
                welds_.emplace_back(g.rows[i], g.cols[i]);
        out.welds = welds_;

        Matrix fin(nrows_, ncols_);
        for (auto [i, j] : welds_) {
            if (std::abs(m_(i, j) - Scalar(1.0)) > 1e-6)
                throw CycleError("marked-block internal: weld drifted");
            fin(i, j) = Scalar(1.0);
        }
        std::vector<bool> row_regular(nrows_, false), col_regular(ncols_, false);
        for (const auto& piece : regular_) {
            for (std::size_t i = 0; i < piece.rows.size(); ++i) {
                row_regular[piece.rows[i]] = true;
                col_regular[piece.cols[i]] = true;
                for (std::size_t j = 0; j < piece.cols.size(); ++j)
                    fin(piece.rows[i], piece.cols[j]) = piece.content(i, j);
            }
        }
        if ((fin - m_).max_abs() > 1e-6 * scale_)
            throw CycleError("marked-block internal: residual content above tolerance");
        out.final_form = fin;

        for (const auto& piece : regular_)
            for (const Matrix& b : split_regular(piece.content)) {
                BlockReductionResult r;
                r.kind = BlockReductionResult::Kind::NonsingularCrossed;
                r.block = b;
                r.cross = piece.mode;
                out.summands.push_back(std::move(r));
            }

        // the 0/1 part: connected components of the weld matching
        std::vector<long> row_comp(nrows_, -1), col_comp(ncols_, -1);
        std::map<std::size_t, std::size_t> weld_rc, weld_cr;
        for (auto [i, j] : welds_) {
            weld_rc[i] = j;
            weld_cr[j] = i;
        }
        long ncomp = 0;
        auto flood = [&](std::size_t row0) {
            std::vector<std::size_t> rows{row0}, cols;
            row_comp[row0] = ncomp;
            bool grew = true;
            while (grew) {
                grew = false;
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    auto it = weld_rc.find(rows[i]);
                    if (it != weld_rc.end() && col_comp[it->second] < 0) {
                        col_comp[it->second] = ncomp;
                        cols.push_back(it->second);
                        grew = true;
                    }
                }
                for (std::size_t j = 0; j < cols.size(); ++j) {
                    auto it = weld_cr.find(cols[j]);
                    if (it != weld_cr.end() && row_comp[it->second] < 0) {
                        row_comp[it->second] = ncomp;
                        rows.push_back(it->second);
                        grew = true;
                    }
                }
            }
            std::sort(rows.begin(), rows.end());
            std::sort(cols.begin(), cols.end());
            return std::make_pair(rows, cols);
        };
        for (std::size_t i = 0; i < nrows_; ++i) {
            if (row_regular[i] || row_comp[i] >= 0) continue;
            auto [rows, cols] = flood(i);
            BlockReductionResult zr;
            zr.kind = BlockReductionResult::Kind::ZeroOne;
            Matrix zb(rows.size(), cols.size());
            for (std::size_t a = 0; a < rows.size(); ++a)
                for (std::size_t bc = 0; bc < cols.size(); ++bc)
                    zb(a, bc) = fin(rows[a], cols[bc]);
            zr.block = zb;
            out.summands.push_back(std::move(zr));
            ++ncomp;
        }
        for (std::size_t j = 0; j < ncols_; ++j) {
            if (col_regular[j] || col_comp[j] >= 0) continue;
            BlockReductionResult zr;
            zr.kind = BlockReductionResult::Kind::ZeroOne;
            zr.block = Matrix(0, 1);
            out.summands.push_back(std::move(zr));
            col_comp[j] = ncomp++;
        }
        return out;
    }

    static std::vector<Matrix> split_regular(const Matrix& c) {
        std::vector<Matrix> out;
        const std::size_t n = c.rows();
        std::size_t start = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool boundary = (i + 1 == n);
            if (!boundary) {
                boundary = true;
                for (std::size_t a = start; a <= i && boundary; ++a)
                    for (std::size_t b = i + 1; b < n && boundary; ++b)
                        if (c(a, b) != Scalar(0.0) || c(b, a) != Scalar(0.0)) boundary = false;
            }
            if (boundary) {
                out.push_back(c.block(start, start, i + 1 - start, i + 1 - start));
                start = i + 1;
            }
        }
        return out;
    }
};

}  // namespace mbm

inline BlockReduction reduce_marked(const MarkedBlockMatrix& m, const Tolerance& tol) {
    mbm::Reducer red(m, tol);
    return red.run();
}

}  // namespace cyclecanon
