// Dense matrix, seeded counter-based RNG substreams, Cholesky, log-sum-exp, PCA.
#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedgen/error.hpp"

namespace fedgen {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    static Matrix identity(std::size_t n);
};

// Counter-based generator keyed by a root seed plus a derivation path of
// (label, index) pairs. Streams for distinct paths are independent; the same
// (seed, path) always replays the same sequence.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t root_seed);

    // Derive a child stream. Children are independent of the parent and of
    // each other; deriving is cheap and order-independent.
    SeededRng derive(const std::string& label, std::uint64_t index = 0) const;

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double next_double();
    // Uniform integer in [0, bound).
    std::uint64_t next_below(std::uint64_t bound);
    // Standard normal via Box-Muller.
    double next_normal();
    // Gamma(shape, 1) via Marsaglia-Tsang.
    double next_gamma(double shape);
    std::vector<double> next_dirichlet(const std::vector<double>& alpha);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[next_below(i)]);
    }

    // k distinct indices from [0, n), returned sorted ascending.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    SeededRng(std::uint64_t key, std::uint64_t counter);
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

struct PcaModel {
    std::vector<double> mean;         // length d
    Matrix components;                // k x d, rows orthonormal
    std::vector<double> explained_variance;  // length k, non-increasing
};

// Lower-triangular L with L * L^T = a. Throws NotPositiveDefinite when a
// pivot falls below 1e-12.
Matrix cholesky(const Matrix& a);

// Stable log(sum(exp(v))).
double log_sum_exp(std::span<const double> v);

// Symmetric eigendecomposition by cyclic Jacobi rotations; eigenvalues sorted
// descending with matching eigenvectors as rows of the returned matrix.
void jacobi_eigen_symmetric(const Matrix& a, std::vector<double>& eigenvalues, Matrix& eigenvectors);

PcaModel pca_fit(const Matrix& x, std::size_t k);
Matrix pca_transform(const PcaModel& model, const Matrix& x);

}  // namespace fedgen
