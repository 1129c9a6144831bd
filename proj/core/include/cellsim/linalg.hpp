#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellsim {

/// Row-major dense matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    [[nodiscard]] static DenseMatrix identity(std::size_t n);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }

    void fill(double v);
    [[nodiscard]] std::vector<double> multiply(std::span<const double> x) const;
    [[nodiscard]] DenseMatrix multiply(const DenseMatrix& rhs) const;

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

class SingularMatrixError : public std::runtime_error {
public:
    SingularMatrixError(const std::string& message, std::size_t pivot_row)
        : std::runtime_error(message), pivot_row_(pivot_row) {}
    [[nodiscard]] std::size_t pivot_row() const noexcept { return pivot_row_; }

private:
    std::size_t pivot_row_;
};

/// LU factorization with partial (row) pivoting, PA = LU.
///
/// A pivot whose magnitude falls below `relative_pivot_floor` times the largest
/// entry of the original matrix is reported as singular.
class LuFactorization {
public:
    static constexpr double kDefaultPivotFloor = 1e-12;

    explicit LuFactorization(DenseMatrix a, double relative_pivot_floor = kDefaultPivotFloor);

    [[nodiscard]] std::size_t size() const noexcept { return lu_.rows(); }
    [[nodiscard]] std::vector<double> solve(std::span<const double> rhs) const;
    /// Solves for every column of `rhs`.
    [[nodiscard]] DenseMatrix solve(const DenseMatrix& rhs) const;

private:
    DenseMatrix lu_;
    std::vector<std::size_t> perm_;
};

/// ||A x - z||_inf
[[nodiscard]] double residual_inf(const DenseMatrix& a, std::span<const double> x, std::span<const double> z);
[[nodiscard]] double norm_inf(std::span<const double> v);

}  // namespace cellsim
