#include "cdanse/linalg.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <string>

namespace cdanse::linalg {

SparseMatrix SparseMatrix::from_triplets(int dim, std::span<const Triplet> entries) {
    if (dim < 0) throw std::invalid_argument("from_triplets: negative dimension");
    for (const auto& t : entries) {
        if (t.row < 0 || t.row >= dim || t.col < 0 || t.col >= dim)
            throw std::out_of_range("from_triplets: index (" + std::to_string(t.row) + "," +
                                    std::to_string(t.col) + ") outside dim " + std::to_string(dim));
    }

    // Counting sort by row, then sort each row by column and sum duplicates.
    std::vector<int> counts(dim + 1, 0);
    for (const auto& t : entries) counts[t.row + 1]++;
    for (int r = 0; r < dim; ++r) counts[r + 1] += counts[r];

    std::vector<std::pair<int, double>> by_row(entries.size());
    {
        std::vector<int> cursor(counts.begin(), counts.end() - 1);
        for (const auto& t : entries) by_row[cursor[t.row]++] = {t.col, t.value};
    }

    SparseMatrix m;
    m.dim_ = dim;
    m.row_offsets_.assign(1, 0);
    m.row_offsets_.reserve(dim + 1);
    m.cols_.reserve(entries.size());
    m.values_.reserve(entries.size());
    for (int r = 0; r < dim; ++r) {
        auto begin = by_row.begin() + counts[r];
        auto end = by_row.begin() + counts[r + 1];
        std::sort(begin, end, [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto it = begin; it != end;) {
            double sum = it->second;
            int col = it->first;
            ++it;
            while (it != end && it->first == col) {
                sum += it->second;
                ++it;
            }
            m.cols_.push_back(col);
            m.values_.push_back(sum);
        }
        m.row_offsets_.push_back(static_cast<int>(m.cols_.size()));
    }
    return m;
}

double SparseMatrix::coeff(int row, int col) const {
    auto begin = cols_.begin() + row_offsets_[row];
    auto end = cols_.begin() + row_offsets_[row + 1];
    auto it = std::lower_bound(begin, end, col);
    if (it == end || *it != col) return 0.0;
    return values_[static_cast<std::size_t>(it - cols_.begin())];
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim_)
        throw std::invalid_argument("multiply: size mismatch");
    std::vector<double> y(dim_, 0.0);
    for (int r = 0; r < dim_; ++r) {
        double acc = 0.0;
        for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
            acc += values_[k] * x[cols_[k]];
        y[r] = acc;
    }
    return y;
}

bool SparseMatrix::same_pattern(const SparseMatrix& other) const {
    return dim_ == other.dim_ && row_offsets_ == other.row_offsets_ && cols_ == other.cols_;
}

struct LuFactorization::Impl {
    Eigen::SparseMatrix<double> matrix;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

LuFactorization::LuFactorization(const SparseMatrix& matrix) : impl_(std::make_unique<Impl>()) {
    const int n = matrix.dim();
    Eigen::SparseMatrix<double> A(n, n);
    {
        std::vector<Eigen::Triplet<double>> ts;
        ts.reserve(matrix.nnz());
        for (int r = 0; r < n; ++r)
            for (int k = matrix.row_offsets()[r]; k < matrix.row_offsets()[r + 1]; ++k)
                ts.emplace_back(r, matrix.cols()[k], matrix.values()[k]);
        A.setFromTriplets(ts.begin(), ts.end());
    }
    impl_->matrix = std::move(A);
    impl_->lu.isSymmetric(false);
    impl_->lu.analyzePattern(impl_->matrix);
    impl_->lu.factorize(impl_->matrix);
    if (impl_->lu.info() != Eigen::Success)
        throw SingularMatrixError("sparse LU factorization failed: " + impl_->lu.lastErrorMessage());
}

LuFactorization::~LuFactorization() = default;
LuFactorization::LuFactorization(LuFactorization&&) noexcept = default;
LuFactorization& LuFactorization::operator=(LuFactorization&&) noexcept = default;

std::vector<double> LuFactorization::solve(std::span<const double> rhs) const {
    const int n = static_cast<int>(impl_->matrix.rows());
    if (static_cast<int>(rhs.size()) != n)
        throw std::invalid_argument("lu solve: rhs size mismatch");
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), n);
    Eigen::VectorXd x = impl_->lu.solve(b);
    if (impl_->lu.info() != Eigen::Success)
        throw SingularMatrixError("sparse LU solve failed");
    return {x.data(), x.data() + n};
}

std::vector<double> lu_solve(const SparseMatrix& matrix, std::span<const double> rhs) {
    return LuFactorization(matrix).solve(rhs);
}

}  // namespace cdanse::linalg
