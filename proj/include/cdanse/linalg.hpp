#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace cdanse::linalg {

struct Triplet {
    int row;
    int col;
    double value;
};

/// Compressed-row sparse matrix. Column indices are strictly increasing
/// within each row and duplicates are summed at construction.
class SparseMatrix {
public:
    SparseMatrix() = default;

    static SparseMatrix from_triplets(int dim, std::span<const Triplet> entries);

    int dim() const { return dim_; }
    std::size_t nnz() const { return cols_.size(); }

    const std::vector<int>& row_offsets() const { return row_offsets_; }
    const std::vector<int>& cols() const { return cols_; }
    const std::vector<double>& values() const { return values_; }

    double coeff(int row, int col) const;

    /// y = A x
    std::vector<double> multiply(std::span<const double> x) const;

    bool same_pattern(const SparseMatrix& other) const;

private:
    int dim_ = 0;
    std::vector<int> row_offsets_{0};
    std::vector<int> cols_;
    std::vector<double> values_;
};

class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sparse LU with fill-reducing column ordering and partial pivoting.
/// Factor once, solve many; deterministic for identical input.
class LuFactorization {
public:
    explicit LuFactorization(const SparseMatrix& matrix);
    ~LuFactorization();
    LuFactorization(LuFactorization&&) noexcept;
    LuFactorization& operator=(LuFactorization&&) noexcept;

    std::vector<double> solve(std::span<const double> rhs) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<double> lu_solve(const SparseMatrix& matrix, std::span<const double> rhs);

}  // namespace cdanse::linalg
