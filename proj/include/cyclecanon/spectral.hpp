#pragma once

// Canonical forms of the two loop cases with explicit transforms.
//
// Similarity: Jordan form via Weyr structure plus generalized-eigenvector
// chain extraction; T^{-1} A T = C.
//
// Consimilarity: each square complex matrix is consimilar to a direct sum of
//   Type 0:  J_k(0)
//   Type I:  J_k(lambda), lambda real positive
//   Type II: H_{2k}(mu),  mu negative real or not real
// The regular classes come from the Jordan structure of A * conj(A): a real
// positive eigenvalue sigma with blocks of size s gives Type I J_s(sqrt(sigma));
// eigenvalues in conjugate pairs (or negative real, paired by multiplicity)
// give Type II H_{2s}(mu). Type 0 sizes come from the rank sequence of the
// alternating word A conj(A) A ... ; conj(T)^{-1} A T = C.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "matrix.hpp"
#include "numerics.hpp"

namespace cyclecanon {

struct SimClass {
    std::vector<std::pair<Scalar, std::size_t>> blocks;  // (lambda, size)
};

struct SimCanonical {
    SimClass cls;
    Matrix transform;  // T with T^{-1} A T = canonical
    Matrix canonical;
    bool ill_conditioned = false;
    double residual = 0.0;
};

struct ConsimClass {
    std::vector<std::size_t> type0;                        // sizes k of J_k(0)
    std::vector<std::pair<double, std::size_t>> type1;     // (lambda > 0, k)
    std::vector<std::pair<Scalar, std::size_t>> type2;     // (mu, 2k), Im mu > 0 or mu < 0
};

struct ConsimCanonical {
    ConsimClass cls;
    Matrix transform;  // T with conj(T)^{-1} A T = canonical
    Matrix canonical;
    bool ill_conditioned = false;
    double residual = 0.0;
};

namespace detail {

// Greedy selection of `count` columns of `candidates` extending span(base).
inline std::vector<Matrix> pick_independent(const Matrix& base, const Matrix& candidates,
                                            std::size_t count, const Tolerance& tol) {
    std::vector<Matrix> picked;
    Matrix span = base;
    std::vector<bool> used(candidates.cols(), false);
    for (std::size_t round = 0; round < count; ++round) {
        double best = -1.0;
        std::size_t best_j = candidates.cols();
        Matrix best_res;
        for (std::size_t j = 0; j < candidates.cols(); ++j) {
            if (used[j]) continue;
            Matrix v = candidates.col(j);
            Matrix r = v;
            if (span.cols() > 0) r = v - span * solve_lstsq(span, v);
            const double rn = r.frobenius_norm();
            if (rn > best) {
                best = rn;
                best_j = j;
                best_res = v;
            }
        }
        if (best_j == candidates.cols() || best <= tol.eps) break;
        used[best_j] = true;
        picked.push_back(best_res);
        span = hstack(span, best_res);
    }
    return picked;
}

}  // namespace detail

inline SimCanonical similarity_canonical(const Matrix& a, const Tolerance& tol) {
    if (a.rows() != a.cols()) throw std::invalid_argument("similarity_canonical: not square");
    const std::size_t n = a.rows();
    SimCanonical out;
    if (n == 0) {
        out.transform = Matrix(0, 0);
        out.canonical = Matrix(0, 0);
        return out;
    }
    JordanStructure js = jordan_structure(a, tol);
    out.ill_conditioned = js.ill_conditioned;

    // group blocks per eigenvalue representative (already clustered)
    std::vector<std::pair<Scalar, std::vector<std::size_t>>> groups;
    for (const auto& [lam, size] : js.blocks) {
        if (groups.empty() || std::abs(groups.back().first - lam) > 0.0)
            groups.push_back({lam, {}});
        groups.back().second.push_back(size);
    }

    Matrix t(n, 0);
    Matrix canon(0, 0);
    for (auto& [lam, sizes] : groups) {
        Matrix k = a;
        for (std::size_t i = 0; i < n; ++i) k(i, i) -= lam;
        std::sort(sizes.begin(), sizes.end(), std::greater<std::size_t>());
        const std::size_t smax = sizes.front();
        std::vector<Matrix> kernels;  // kernels[j] = orthonormal basis of ker K^{j+1}
        Matrix p = identity(n);
        for (std::size_t j = 0; j < smax; ++j) {
            p = k * p;
            kernels.push_back(nullspace(p, tol));
        }
        // occupied[h] = chain vectors of height h+1 already claimed
        std::vector<Matrix> occupied(smax, Matrix(n, 0));
        for (std::size_t j = smax; j >= 1; --j) {
            std::size_t count = 0;
            for (std::size_t s : sizes) count += (s == j) ? 1 : 0;
            if (count > 0) {
                Matrix base = (j >= 2) ? kernels[j - 2] : Matrix(n, 0);
                base = hstack(base, occupied[j - 1]);
                auto tops = detail::pick_independent(base, kernels[j - 1], count, tol);
                for (const auto& top : tops) {
                    std::vector<Matrix> chain{top};
                    for (std::size_t step = 1; step < j; ++step)
                        chain.push_back(k * chain.back());
                    // columns K^{j-1}v .. Kv, v give the upper Jordan block
                    for (std::size_t step = 0; step < j; ++step) {
                        t = hstack(t, chain[j - 1 - step]);
                        occupied[j - 1 - step] = hstack(occupied[j - 1 - step],
                                                        chain[j - 1 - step]);
                    }
                    canon = direct_sum(canon, jordan_block(lam, j));
                    out.cls.blocks.emplace_back(lam, j);
                }
            }
            if (j == 1) break;
        }
    }
    if (t.cols() != n) {
        out.ill_conditioned = true;
        throw CycleError("similarity_canonical: chain extraction failed");
    }
    out.transform = t;
    out.canonical = canon;
    Matrix check = solve_lstsq(t, a * t) - canon;
    out.residual = check.frobenius_norm() / std::max(1.0, a.frobenius_norm());
    if (out.residual > 1e-8) out.ill_conditioned = true;
    return out;
}

namespace detail {

// Solve A T_b = conj(T_b) C_b for an n x k block of columns, by realification.
// Returns a random element of the solution space (seeded).
inline Matrix consim_block_solve(const Matrix& a, const Matrix& cb, std::mt19937_64& rng) {
    const std::size_t n = a.rows();
    const std::size_t k = cb.cols();
    using RM = Eigen::MatrixXd;
    // unknowns: x = vec(Re T), y = vec(Im T), column-major
    const std::size_t m = n * k;
    RM sys(2 * m, 2 * m);
    sys.setZero();
    auto idx = [&](std::size_t col, std::size_t row) { return col * n + row; };
    // rows of equations: for each (col j, row i):
    // E1(i,j): sum_l ARe(i,l) x(l,j) - AIm(i,l) y(l,j) - sum_l x(i,l) CRe(l,j) + ...
    // A T - conj(T) C = 0 with T = X + iY:
    //   real: ARe X - AIm Y - (X CRe + Y CIm) = 0
    //   imag: AIm X + ARe Y - (X CIm - Y CRe) = 0
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t er = idx(j, i);          // real equation row
            const std::size_t ei = m + idx(j, i);      // imag equation row
            for (std::size_t l = 0; l < n; ++l) {
                sys(static_cast<Eigen::Index>(er), static_cast<Eigen::Index>(idx(j, l))) +=
                    a(i, l).real();
                sys(static_cast<Eigen::Index>(er),
                    static_cast<Eigen::Index>(m + idx(j, l))) -= a(i, l).imag();
                sys(static_cast<Eigen::Index>(ei), static_cast<Eigen::Index>(idx(j, l))) +=
                    a(i, l).imag();
                sys(static_cast<Eigen::Index>(ei),
                    static_cast<Eigen::Index>(m + idx(j, l))) += a(i, l).real();
            }
            for (std::size_t l = 0; l < k; ++l) {
                sys(static_cast<Eigen::Index>(er), static_cast<Eigen::Index>(idx(l, i))) -=
                    cb(l, j).real();
                sys(static_cast<Eigen::Index>(er),
                    static_cast<Eigen::Index>(m + idx(l, i))) -= cb(l, j).imag();
                sys(static_cast<Eigen::Index>(ei), static_cast<Eigen::Index>(idx(l, i))) -=
                    cb(l, j).imag();
                sys(static_cast<Eigen::Index>(ei),
                    static_cast<Eigen::Index>(m + idx(l, i))) += cb(l, j).real();
            }
        }
    Eigen::JacobiSVD<RM> svd(sys, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cutoff = (sv.size() > 0) ? 1e-10 * std::max(1.0, sv(0)) : 0.0;
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++rank;
    const std::size_t nullity = 2 * m - rank;
    if (nullity == 0) return Matrix(n, 0);
    RM basis = svd.matrixV().rightCols(static_cast<Eigen::Index>(nullity));
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd combo(static_cast<Eigen::Index>(nullity));
    for (Eigen::Index i = 0; i < combo.size(); ++i) combo(i) = g(rng);
    Eigen::VectorXd sol = basis * combo;
    Matrix t(n, k);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < n; ++i)
            t(i, j) = Scalar(sol(static_cast<Eigen::Index>(idx(j, i))),
                             sol(static_cast<Eigen::Index>(m + idx(j, i))));
    return t;
}

}  // namespace detail

inline Matrix canonical_matrix(const ConsimClass& cls) {
    Matrix c(0, 0);
    for (std::size_t k : cls.type0) c = direct_sum(c, jordan_block(Scalar(0.0), k));
    for (const auto& [lam, k] : cls.type1) c = direct_sum(c, jordan_block(Scalar(lam), k));
    for (const auto& [mu, k2] : cls.type2) c = direct_sum(c, h_block(mu, k2 / 2));
    return c;
}

inline ConsimCanonical consimilarity_canonical(const Matrix& a, const Tolerance& tol) {
    if (a.rows() != a.cols()) throw std::invalid_argument("consimilarity_canonical: not square");
    const std::size_t n = a.rows();
    ConsimCanonical out;
    if (n == 0) {
        out.transform = Matrix(0, 0);
        out.canonical = Matrix(0, 0);
        return out;
    }
    const double scale = std::max(1.0, a.frobenius_norm());

    // Type 0 sizes from the alternating word rank sequence.
    std::vector<std::size_t> word_rank{n};
    for (std::size_t j = 1; j <= 2 * n + 1; ++j) {
        word_rank.push_back(rank_tol(alternating_word(a, j), tol));
        if (word_rank.back() == word_rank[word_rank.size() - 2]) break;
    }
    // geq[j] = number of type-0 blocks of size >= j
    std::vector<std::size_t> geq;
    for (std::size_t j = 1; j < word_rank.size(); ++j)
        geq.push_back(word_rank[j - 1] - word_rank[j]);
    for (std::size_t j = 0; j < geq.size(); ++j) {
        const std::size_t next = (j + 1 < geq.size()) ? geq[j + 1] : 0;
        for (std::size_t b = 0; b < geq[j] - next; ++b) out.cls.type0.push_back(j + 1);
    }

    // Regular classes from the Jordan structure of A conj(A).
    Matrix b = a * a.conj();
    JordanStructure js = jordan_structure(b, tol);
    out.ill_conditioned = js.ill_conditioned;
    const double zero_cut = tol.cluster_eps * std::max(1.0, b.frobenius_norm());

    // collect distinct representatives with their size multisets
    std::vector<std::pair<Scalar, std::vector<std::size_t>>> groups;
    for (const auto& [lam, size] : js.blocks) {
        if (std::abs(lam) <= zero_cut) continue;  // accounted for by type 0
        bool added = false;
        for (auto& g : groups)
            if (g.first == lam) {
                g.second.push_back(size);
                added = true;
            }
        if (!added) groups.push_back({lam, {size}});
    }
    std::vector<bool> consumed(groups.size(), false);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        if (consumed[gi]) continue;
        const Scalar sigma = groups[gi].first;
        auto sizes = groups[gi].second;
        if (std::abs(sigma.imag()) <= tol.cluster_eps * std::max(1.0, std::abs(sigma)) &&
            sigma.real() > 0.0) {
            // Type I
            for (std::size_t s : sizes) out.cls.type1.emplace_back(std::sqrt(sigma.real()), s);
            consumed[gi] = true;
        } else if (std::abs(sigma.imag()) <= tol.cluster_eps * std::max(1.0, std::abs(sigma))) {
            // negative real: blocks pair up within the cluster
            std::sort(sizes.begin(), sizes.end());
            if (sizes.size() % 2 != 0)
                throw CycleError("consimilarity_canonical: unpaired negative block");
            for (std::size_t i = 0; i < sizes.size(); i += 2) {
                if (sizes[i] != sizes[i + 1])
                    throw CycleError("consimilarity_canonical: mismatched negative pair");
                out.cls.type2.emplace_back(Scalar(sigma.real(), 0.0), 2 * sizes[i]);
            }
            consumed[gi] = true;
        } else {
            // nonreal: pair with the conjugate cluster
            std::size_t partner = groups.size();
            double best = std::numeric_limits<double>::max();
            for (std::size_t gj = 0; gj < groups.size(); ++gj) {
                if (gj == gi || consumed[gj]) continue;
                const double d = std::abs(groups[gj].first - std::conj(sigma));
                if (d < best) {
                    best = d;
                    partner = gj;
                }
            }
            if (partner == groups.size() || best > tol.cluster_eps * scale * 10.0)
                throw CycleError("consimilarity_canonical: missing conjugate partner");
            auto s2 = groups[partner].second;
            std::sort(sizes.begin(), sizes.end());
            std::sort(s2.begin(), s2.end());
            if (sizes != s2)
                throw CycleError("consimilarity_canonical: conjugate partner size mismatch");
            const Scalar mu = (sigma.imag() > 0.0) ? sigma : std::conj(sigma);
            for (std::size_t s : sizes) out.cls.type2.emplace_back(mu, 2 * s);
            consumed[gi] = consumed[partner] = true;
        }
    }

    // deterministic order inside the class
    std::sort(out.cls.type0.begin(), out.cls.type0.end());
    std::sort(out.cls.type1.begin(), out.cls.type1.end());
    std::sort(out.cls.type2.begin(), out.cls.type2.end(),
              [](const auto& x, const auto& y) {
                  if (x.first.real() != y.first.real()) return x.first.real() < y.first.real();
                  if (x.first.imag() != y.first.imag()) return x.first.imag() < y.first.imag();
                  return x.second < y.second;
              });

    std::size_t total = 0;
    for (std::size_t k : out.cls.type0) total += k;
    for (auto& [l, k] : out.cls.type1) total += k;
    for (auto& [m, k] : out.cls.type2) total += k;
    if (total != n) throw CycleError("consimilarity_canonical: sizes do not sum to order");

    out.canonical = canonical_matrix(out.cls);

    // transform: per-block realified solve, random in the solution space,
    // retried until the assembled T is invertible
    std::mt19937_64 rng(0x5eed5eedULL ^ (n * 1315423911ULL));
    double best_res = std::numeric_limits<double>::max();
    for (int attempt = 0; attempt < 8; ++attempt) {
        Matrix t(n, 0);
        std::size_t off = 0;
        auto absorb = [&](const Matrix& blk) {
            Matrix tb = detail::consim_block_solve(a, blk, rng);
            t = hstack(t, tb);
            off += blk.cols();
        };
        for (std::size_t k : out.cls.type0) absorb(jordan_block(Scalar(0.0), k));
        for (const auto& [lam, k] : out.cls.type1) absorb(jordan_block(Scalar(lam), k));
        for (const auto& [mu, k2] : out.cls.type2) absorb(h_block(mu, k2 / 2));
        if (t.cols() != n) continue;
        if (condition_number(t) > 1e8) continue;
        Matrix lhs = a * t;
        Matrix rhs = t.conj() * out.canonical;
        const double res = (lhs - rhs).frobenius_norm() / scale;
        Matrix recon = solve_lstsq(t.conj(), a * t) - out.canonical;
        const double res2 = recon.frobenius_norm() / scale;
        if (std::max(res, res2) < best_res) {
            best_res = std::max(res, res2);
            out.transform = t;
        }
        if (best_res <= 1e-9) break;
    }
    out.residual = best_res;
    if (out.transform.cols() != n) {
        out.ill_conditioned = true;
        throw CycleError("consimilarity_canonical: no invertible transform found");
    }
    if (best_res > 1e-8) out.ill_conditioned = true;
    return out;
}

}  // namespace cyclecanon
