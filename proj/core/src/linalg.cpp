#include "cellsim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace cellsim {

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::vector<double> DenseMatrix::multiply(std::span<const double> x) const {
    if (x.size() != cols_) throw std::invalid_argument("dimension mismatch in matrix-vector product");
    std::vector<double> y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        double acc = 0.0;
        const double* a = data_.data() + r * cols_;
        for (std::size_t c = 0; c < cols_; ++c) acc += a[c] * x[c];
        y[r] = acc;
    }
    return y;
}

DenseMatrix DenseMatrix::multiply(const DenseMatrix& rhs) const {
    if (rhs.rows_ != cols_) throw std::invalid_argument("dimension mismatch in matrix product");
    DenseMatrix out(rows_, rhs.cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(r, k);
            if (a == 0.0) continue;
            for (std::size_t c = 0; c < rhs.cols_; ++c) out(r, c) += a * rhs(k, c);
        }
    }
    return out;
}

LuFactorization::LuFactorization(DenseMatrix a, double relative_pivot_floor)
    : lu_(std::move(a)), perm_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    if (lu_.cols() != n) throw std::invalid_argument("LU factorization needs a square matrix");
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;

    double scale = 0.0;
    for (double v : lu_.data()) scale = std::max(scale, std::abs(v));
    const double floor = relative_pivot_floor * scale;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        double best = std::abs(lu_(k, k));
        for (std::size_t r = k + 1; r < n; ++r) {
            const double v = std::abs(lu_(r, k));
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (!(best > floor) || best == 0.0) {
            throw SingularMatrixError("matrix is singular at pivot " + std::to_string(k), k);
        }
        if (pivot != k) {
            for (std::size_t c = 0; c < n; ++c) std::swap(lu_(k, c), lu_(pivot, c));
            std::swap(perm_[k], perm_[pivot]);
        }
        const double inv = 1.0 / lu_(k, k);
        for (std::size_t r = k + 1; r < n; ++r) {
            double& f = lu_(r, k);
            if (f == 0.0) continue;
            f *= inv;
            for (std::size_t c = k + 1; c < n; ++c) lu_(r, c) -= f * lu_(k, c);
        }
    }
}

std::vector<double> LuFactorization::solve(std::span<const double> rhs) const {
    const std::size_t n = size();
    if (rhs.size() != n) throw std::invalid_argument("dimension mismatch in LU solve");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = rhs[perm_[i]];
    for (std::size_t i = 0; i < n; ++i) {
        double acc = x[i];
        for (std::size_t c = 0; c < i; ++c) acc -= lu_(i, c) * x[c];
        x[i] = acc;
    }
    for (std::size_t i = n; i-- > 0;) {
        double acc = x[i];
        for (std::size_t c = i + 1; c < n; ++c) acc -= lu_(i, c) * x[c];
        x[i] = acc / lu_(i, i);
    }
    return x;
}

DenseMatrix LuFactorization::solve(const DenseMatrix& rhs) const {
    const std::size_t n = size();
    if (rhs.rows() != n) throw std::invalid_argument("dimension mismatch in LU solve");
    DenseMatrix out(n, rhs.cols());
    std::vector<double> column(n);
    for (std::size_t c = 0; c < rhs.cols(); ++c) {
        for (std::size_t r = 0; r < n; ++r) column[r] = rhs(r, c);
        const auto x = solve(column);
        for (std::size_t r = 0; r < n; ++r) out(r, c) = x[r];
    }
    return out;
}

double norm_inf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double residual_inf(const DenseMatrix& a, std::span<const double> x, std::span<const double> z) {
    const auto ax = a.multiply(x);
    double m = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) m = std::max(m, std::abs(ax[i] - z[i]));
    return m;
}

}  // namespace cellsim
