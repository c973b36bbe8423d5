#pragma once

// Tolerance-controlled primitives. Rank decisions go through singular values;
// basis extraction goes through pivoted factorizations. Eigen supplies the
// factorization kernels; every decision threshold lives in Tolerance.

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "cycle.hpp"
#include "matrix.hpp"

namespace cyclecanon {

struct Tolerance {
    double eps = 1e-9;          // relative threshold for rank/zero decisions
    double cluster_eps = 1e-7;  // eigenvalue clustering radius
};

using EMatrix = Eigen::MatrixXcd;
using EVector = Eigen::VectorXcd;

inline EMatrix to_eigen(const Matrix& m) {
    EMatrix r(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
    return r;
}

inline Matrix from_eigen(const EMatrix& m) {
    Matrix r(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            r(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
    return r;
}

inline std::size_t rank_tol(const Matrix& m, const Tolerance& tol) {
    if (m.empty()) return 0;
    Eigen::JacobiSVD<EMatrix> svd(to_eigen(m));
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double cutoff = tol.eps * sv(0);
    if (sv(0) == 0.0) return 0;
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++r;
    return r;
}

// Orthonormal basis of the kernel, as columns.
inline Matrix nullspace(const Matrix& m, const Tolerance& tol) {
    if (m.cols() == 0) return Matrix(0, 0);
    if (m.rows() == 0) return identity(m.cols());
    Eigen::JacobiSVD<EMatrix> svd(to_eigen(m), Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cutoff = (sv.size() > 0 && sv(0) > 0.0) ? tol.eps * sv(0) : 0.0;
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++r;
    const std::size_t k = m.cols() - r;
    EMatrix v = svd.matrixV();
    return from_eigen(v.rightCols(static_cast<Eigen::Index>(k)));
}

// Orthonormal basis of the column space.
inline Matrix column_space(const Matrix& m, const Tolerance& tol) {
    if (m.rows() == 0 || m.cols() == 0) return Matrix(m.rows(), 0);
    Eigen::JacobiSVD<EMatrix> svd(to_eigen(m), Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    const double cutoff = (sv.size() > 0 && sv(0) > 0.0) ? tol.eps * sv(0) : 0.0;
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++r;
    EMatrix u = svd.matrixU();
    return from_eigen(u.leftCols(static_cast<Eigen::Index>(r)));
}

// Minimum-norm least-squares solution of A x = b (column by column).
inline Matrix solve_lstsq(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("solve_lstsq: row mismatch");
    if (a.cols() == 0) return Matrix(0, b.cols());
    if (a.rows() == 0) return Matrix(a.cols(), b.cols());
    Eigen::JacobiSVD<EMatrix> svd(to_eigen(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
    return from_eigen(svd.solve(to_eigen(b)));
}

inline Matrix inverse(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("inverse: matrix not square");
    if (a.rows() == 0) return a;
    Eigen::FullPivLU<EMatrix> lu(to_eigen(a));
    if (!lu.isInvertible()) throw SingularMap("inverse: matrix numerically singular");
    return from_eigen(lu.inverse());
}

inline double condition_number(const Matrix& a) {
    if (a.empty()) return 1.0;
    Eigen::JacobiSVD<EMatrix> svd(to_eigen(a));
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / sv(sv.size() - 1);
}

inline std::vector<Scalar> eigenvalues(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("eigenvalues: matrix not square");
    if (a.rows() == 0) return {};
    Eigen::ComplexEigenSolver<EMatrix> es(to_eigen(a), false);
    std::vector<Scalar> r;
    r.reserve(a.rows());
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) r.push_back(es.eigenvalues()(i));
    return r;
}

struct EigenCluster {
    Scalar representative;  // mean of members
    std::size_t multiplicity = 0;
};

// Single-linkage clustering with the given radius; representatives are means.
// Returns clusters sorted by (Re, Im) of the representative.
inline std::vector<EigenCluster> cluster_eigenvalues(std::vector<Scalar> vals, double radius) {
    std::vector<EigenCluster> out;
    std::vector<bool> used(vals.size(), false);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (used[i]) continue;
        std::vector<std::size_t> members{i};
        used[i] = true;
        for (std::size_t m = 0; m < members.size(); ++m) {
            for (std::size_t j = 0; j < vals.size(); ++j) {
                if (used[j]) continue;
                if (std::abs(vals[j] - vals[members[m]]) <= radius) {
                    used[j] = true;
                    members.push_back(j);
                }
            }
        }
        Scalar sum(0.0, 0.0);
        for (std::size_t m : members) sum += vals[m];
        out.push_back({sum / static_cast<double>(members.size()), members.size()});
    }
    std::sort(out.begin(), out.end(), [](const EigenCluster& a, const EigenCluster& b) {
        if (a.representative.real() != b.representative.real())
            return a.representative.real() < b.representative.real();
        return a.representative.imag() < b.representative.imag();
    });
    return out;
}

struct JordanStructure {
    // (eigenvalue representative, block size), one entry per block.
    std::vector<std::pair<Scalar, std::size_t>> blocks;
    bool ill_conditioned = false;  // cluster separation below 2*cluster_eps, or unvalidated
};

namespace detail {

// Weyr nullity sequence of (A - lambda I) capped at `mult`; returns block
// sizes when the nullities reach exactly `mult`, nullopt otherwise.
//
// Rank of the j-th power is decided against the scale sigma_max(K)^j, not the
// power's own largest singular value: once K^j is numerically zero its whole
// singular spectrum is noise, and a self-relative threshold would read
// structure into it.
inline std::optional<std::vector<std::size_t>> weyr_block_sizes(const Matrix& a,
                                                                const Scalar& lambda,
                                                                std::size_t mult,
                                                                const Tolerance& tol) {
    const std::size_t n = a.rows();
    Matrix k = a;
    for (std::size_t i = 0; i < n; ++i) k(i, i) -= lambda;
    double k_scale = 0.0;
    {
        Eigen::JacobiSVD<EMatrix> svd(to_eigen(k));
        if (svd.singularValues().size() > 0) k_scale = svd.singularValues()(0);
    }
    auto power_rank = [&](const Matrix& p, std::size_t j) {
        Eigen::JacobiSVD<EMatrix> svd(to_eigen(p));
        const double cutoff = tol.eps * std::pow(std::max(k_scale, 1e-300), double(j));
        std::size_t r = 0;
        for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()(i) > cutoff) ++r;
        return r;
    };
    std::vector<std::size_t> null_dims{0};
    Matrix p = identity(n);
    bool reached = false;
    for (std::size_t it = 1; it <= mult + 1 && it <= n + 1; ++it) {
        p = k * p;
        const std::size_t nd = n - power_rank(p, it);
        if (nd <= null_dims.back()) break;  // stalled short of the multiplicity
        if (nd > mult) break;               // kernel sees neighboring clusters
        null_dims.push_back(nd);
        if (nd == mult) {
            reached = true;
            break;
        }
    }
    if (!reached) return std::nullopt;
    std::vector<std::size_t> sizes;
    for (std::size_t j = 1; j < null_dims.size(); ++j) {
        const std::size_t geq_j = null_dims[j] - null_dims[j - 1];
        const std::size_t geq_j1 = (j + 1 < null_dims.size()) ? null_dims[j + 1] - null_dims[j] : 0;
        for (std::size_t b = 0; b < geq_j - geq_j1; ++b) sizes.push_back(j);
    }
    return sizes;
}

}  // namespace detail

// Block sizes at each clustered eigenvalue from the Weyr sequence
// rank((A - lambda I)^k), k = 0, 1, 2, ...
//
// Clustering starts at cluster_eps and escalates the radius geometrically
// until every cluster's Weyr nullities account for exactly its cardinality.
// Defective eigenvalues scatter like (machine eps)^(1/k) under perturbation,
// so a fixed radius cannot both separate honest clusters and absorb the
// scatter; the validation loop picks the smallest radius that reconciles.
inline JordanStructure jordan_structure(const Matrix& a, const Tolerance& tol) {
    if (a.rows() != a.cols()) throw std::invalid_argument("jordan_structure: not square");
    JordanStructure js;
    const std::size_t n = a.rows();
    if (n == 0) return js;
    const auto eigs = eigenvalues(a);
    const double scale = std::max(1.0, a.frobenius_norm());
    const double radius_cap = 0.05 * scale;

    bool valid = false;
    for (double radius = tol.cluster_eps; radius <= radius_cap; radius *= 10.0) {
        auto clusters = cluster_eigenvalues(eigs, radius);
        std::vector<std::pair<Scalar, std::size_t>> blocks;
        valid = true;
        for (const auto& c : clusters) {
            auto sizes = detail::weyr_block_sizes(a, c.representative, c.multiplicity, tol);
            if (!sizes) {
                valid = false;
                break;
            }
            for (std::size_t s : *sizes) blocks.emplace_back(c.representative, s);
        }
        if (valid) {
            js.blocks = std::move(blocks);
            double min_sep = std::numeric_limits<double>::max();
            for (std::size_t i = 0; i < clusters.size(); ++i)
                for (std::size_t j = i + 1; j < clusters.size(); ++j)
                    min_sep = std::min(min_sep, std::abs(clusters[i].representative -
                                                         clusters[j].representative));
            if (min_sep < 2.0 * tol.cluster_eps) js.ill_conditioned = true;
            break;
        }
    }
    if (!valid) {
        // Report a best-effort structure: base clustering, sizes padded with
        // 1-blocks up to each multiplicity.
        js.ill_conditioned = true;
        for (const auto& c : cluster_eigenvalues(eigs, tol.cluster_eps)) {
            std::size_t mult = c.multiplicity;
            for (std::size_t m = mult; m >= 1; --m) {
                if (auto sizes = detail::weyr_block_sizes(a, c.representative, m, tol)) {
                    for (std::size_t s : *sizes) js.blocks.emplace_back(c.representative, s);
                    mult -= m;
                    break;
                }
                if (m == 1) break;
            }
            for (std::size_t b = 0; b < mult; ++b) js.blocks.emplace_back(c.representative, 1);
        }
    }
    std::sort(js.blocks.begin(), js.blocks.end(),
              [](const auto& x, const auto& y) {
                  if (x.first.real() != y.first.real()) return x.first.real() < y.first.real();
                  if (x.first.imag() != y.first.imag()) return x.first.imag() < y.first.imag();
                  return x.second < y.second;
              });
    return js;
}

// Product A * conj(A) * A * ... with `length` factors.
inline Matrix alternating_word(const Matrix& a, std::size_t length) {
    if (a.rows() != a.cols()) throw std::invalid_argument("alternating_word: not square");
    Matrix r = identity(a.rows());
    const Matrix ac = a.conj();
    for (std::size_t i = 0; i < length; ++i) r = r * ((i % 2 == 0) ? a : ac);
    return r;
}

}  // namespace cyclecanon
