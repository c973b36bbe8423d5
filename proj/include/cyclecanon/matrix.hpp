#pragma once

// Dense complex matrices with first-class empty shapes (n x 0 and 0 x n are
// valid values, not error states). Everything downstream relies on that:
// the canonical families contain genuinely empty blocks (F_1 and G_1 are
// 0 x 1), and direct sums must append zero rows/columns when one operand
// has no columns or no rows.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cyclecanon {

using Scalar = std::complex<double>;

inline bool is_finite(const Scalar& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

class Matrix {
  public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, Scalar(0.0, 0.0)) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<Scalar> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows_ * cols_)
            throw std::invalid_argument("Matrix: entry count does not match shape");
    }
    Matrix(std::initializer_list<std::initializer_list<Scalar>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw std::invalid_argument("Matrix: ragged initializer");
            for (const auto& v : r) data_.push_back(v);
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }
    std::size_t size() const { return data_.size(); }

    Scalar& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const Scalar& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<Scalar>& data() const { return data_; }
    std::vector<Scalar>& data() { return data_; }

    bool all_finite() const {
        for (const auto& z : data_)
            if (!is_finite(z)) return false;
        return true;
    }

    Matrix conj() const {
        Matrix r(rows_, cols_);
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] = std::conj(data_[i]);
        return r;
    }

    Matrix transpose() const {
        Matrix r(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
        return r;
    }

    Matrix adjoint() const { return conj().transpose(); }

    Matrix block(std::size_t i0, std::size_t j0, std::size_t h, std::size_t w) const {
        Matrix r(h, w);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) r(i, j) = (*this)(i0 + i, j0 + j);
        return r;
    }

    // Column selection by explicit index list; order matters.
    Matrix select_cols(const std::vector<std::size_t>& idx) const {
        Matrix r(rows_, idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j)
            for (std::size_t i = 0; i < rows_; ++i) r(i, j) = (*this)(i, idx[j]);
        return r;
    }
    Matrix select_rows(const std::vector<std::size_t>& idx) const {
        Matrix r(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(i, j) = (*this)(idx[i], j);
        return r;
    }

    Matrix col(std::size_t j) const { return block(0, j, rows_, 1); }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& z : data_) s += std::norm(z);
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& z : data_) m = std::max(m, std::abs(z));
        return m;
    }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_)
            throw std::invalid_argument("Matrix multiply: inner dimensions " +
                                        std::to_string(a.cols_) + " vs " +
                                        std::to_string(b.rows_));
        Matrix r(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const Scalar aik = a(i, k);
                if (aik == Scalar(0.0, 0.0)) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) r(i, j) += aik * b(k, j);
            }
        return r;
    }

    friend Matrix operator*(const Scalar& s, const Matrix& a) {
        Matrix r = a;
        for (auto& z : r.data_) z *= s;
        return r;
    }

    friend Matrix operator+(const Matrix& a, const Matrix& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
            throw std::invalid_argument("Matrix add: shape mismatch");
        Matrix r = a;
        for (std::size_t i = 0; i < r.data_.size(); ++i) r.data_[i] += b.data_[i];
        return r;
    }

    friend Matrix operator-(const Matrix& a, const Matrix& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
            throw std::invalid_argument("Matrix subtract: shape mismatch");
        Matrix r = a;
        for (std::size_t i = 0; i < r.data_.size(); ++i) r.data_[i] -= b.data_[i];
        return r;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

  private:
    std::size_t rows_, cols_;
    std::vector<Scalar> data_;
};

inline Matrix identity(std::size_t n) {
    Matrix r(n, n);
    for (std::size_t i = 0; i < n; ++i) r(i, i) = Scalar(1.0, 0.0);
    return r;
}

inline Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

// Block diagonal sum honoring empty operands: a 0-column summand appends
// zero rows only, a 0-row summand appends zero columns only.
inline Matrix direct_sum(const Matrix& a, const Matrix& b) {
    Matrix r(a.rows() + b.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = a(i, j);
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) r(a.rows() + i, a.cols() + j) = b(i, j);
    return r;
}

inline Matrix hstack(const Matrix& a, const Matrix& b) {
    if (a.cols() == 0) return b;
    if (b.cols() == 0) return a;
    if (a.rows() != b.rows()) throw std::invalid_argument("hstack: row mismatch");
    Matrix r(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) r(i, a.cols() + j) = b(i, j);
    }
    return r;
}

// Upper bidiagonal Jordan block J_k(lambda).
inline Matrix jordan_block(const Scalar& lambda, std::size_t k) {
    Matrix r(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        r(i, i) = lambda;
        if (i + 1 < k) r(i, i + 1) = Scalar(1.0, 0.0);
    }
    return r;
}

// H_{2k}(mu) = [[0, I_k], [J_k(mu), 0]].
inline Matrix h_block(const Scalar& mu, std::size_t k) {
    Matrix r(2 * k, 2 * k);
    for (std::size_t i = 0; i < k; ++i) r(i, k + i) = Scalar(1.0, 0.0);
    Matrix j = jordan_block(mu, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t jj = 0; jj < k; ++jj) r(k + i, jj) = j(i, jj);
    return r;
}

// F_n and G_n are (n-1) x n; F_1 and G_1 are 0 x 1.
// F_n e_{j+1} = f_j and F_n e_1 = 0; G_n e_j = f_j and G_n e_n = 0.
inline Matrix f_matrix(std::size_t n) {
    Matrix r(n - 1, n);
    for (std::size_t i = 0; i + 1 < n; ++i) r(i, i + 1) = Scalar(1.0, 0.0);
    return r;
}

inline Matrix g_matrix(std::size_t n) {
    Matrix r(n - 1, n);
    for (std::size_t i = 0; i + 1 < n; ++i) r(i, i) = Scalar(1.0, 0.0);
    return r;
}

}  // namespace cyclecanon
