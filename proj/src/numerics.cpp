#include "fedgen/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedgen/kernels.hpp"

namespace fedgen {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

// ---------------------------------------------------------------------------
// SeededRng: splitmix64-style mixing over (key, counter). Path derivation
// folds each (label, index) pair into the key with FNV-1a over the label
// bytes, so distinct paths land on unrelated keys.

static inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

SeededRng::SeededRng(std::uint64_t root_seed) : key_(mix64(root_seed ^ 0x6A09E667F3BCC908ull)) {}

SeededRng::SeededRng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

SeededRng SeededRng::derive(const std::string& label, std::uint64_t index) const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : label) h = (h ^ c) * 0x100000001B3ull;
    std::uint64_t child = mix64(key_ ^ mix64(h) ^ mix64(index * 0x9E3779B97F4A7C15ull + 1));
    return SeededRng(child, 0);
}

std::uint64_t SeededRng::next_u64() {
    return mix64(key_ + (counter_++) * 0x9E3779B97F4A7C15ull);
}

double SeededRng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::next_below(std::uint64_t bound) {
    // rejection sampling for an unbiased draw
    std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
        std::uint64_t r = next_u64();
        if (r >= threshold) return r % bound;
    }
}

double SeededRng::next_normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    cached_normal_ = r * std::sin(2.0 * M_PI * u2);
    have_cached_normal_ = true;
    return r * std::cos(2.0 * M_PI * u2);
}

double SeededRng::next_gamma(double shape) {
    if (shape < 1.0) {
        double u = next_double();
        while (u <= 0.0) u = next_double();
        return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = next_normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = next_double();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<double> SeededRng::next_dirichlet(const std::vector<double>& alpha) {
    std::vector<double> g(alpha.size());
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        g[i] = next_gamma(alpha[i]);
        total += g[i];
    }
    if (total <= 0.0) {
        // all gammas underflowed; fall back to a one-hot on a uniform index
        std::fill(g.begin(), g.end(), 0.0);
        g[next_below(g.size())] = 1.0;
        return g;
    }
    for (double& v : g) v /= total;
    return g;
}

std::vector<std::size_t> SeededRng::sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // partial Fisher-Yates: first k entries are the sample
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + next_below(n - i)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// ---------------------------------------------------------------------------

Matrix cholesky(const Matrix& a) {
    if (a.rows != a.cols) throw Error(ErrorKind::ShapeMismatch, "cholesky: matrix not square");
    const std::size_t n = a.rows;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a.at(i, j) - a.at(j, i)) > 1e-10)
                throw Error(ErrorKind::ShapeMismatch, "cholesky: matrix not symmetric");

    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a.at(j, j) - kern::dot(&l.data[j * n], &l.data[j * n], j);
        if (d <= 1e-12) throw Error(ErrorKind::NotPositiveDefinite, "cholesky: pivot <= 1e-12");
        l.at(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a.at(i, j) - kern::dot(&l.data[i * n], &l.data[j * n], j);
            l.at(i, j) = s / l.at(j, j);
        }
    }
    return l;
}

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) throw Error(ErrorKind::EmptyInput, "log_sum_exp: empty input");
    double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;  // all -inf (or contains +inf)
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

void jacobi_eigen_symmetric(const Matrix& a, std::vector<double>& eigenvalues, Matrix& eigenvectors) {
    const std::size_t n = a.rows;
    Matrix m = a;
    Matrix v = Matrix::identity(n);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += m.at(p, q) * m.at(p, q);
        if (off < 1e-24) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = m.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double mkp = m.at(k, p), mkq = m.at(k, q);
                    m.at(k, p) = c * mkp - s * mkq;
                    m.at(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double mpk = m.at(p, k), mqk = m.at(q, k);
                    m.at(p, k) = c * mpk - s * mqk;
                    m.at(q, k) = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = m.at(i, i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

    eigenvalues.resize(n);
    eigenvectors = Matrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        eigenvalues[r] = diag[order[r]];
        for (std::size_t c = 0; c < n; ++c) eigenvectors.at(r, c) = v.at(c, order[r]);
    }
}

PcaModel pca_fit(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows, d = x.cols;
    if (n < 2 || k < 1 || k > std::min(n, d))
        throw Error(ErrorKind::InvalidConfig, "pca_fit: need n >= 2 and 1 <= k <= min(n, d)");

    PcaModel model;
    model.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) kern::axpy(1.0, x.row(i).data(), model.mean.data(), d);
    for (double& m : model.mean) m /= static_cast<double>(n);

    Matrix centered(n, d);
    for (std::size_t i = 0; i < n; ++i)
        kern::sub(x.row(i).data(), model.mean.data(), centered.row(i).data(), d);

    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = centered.row(i).data();
        for (std::size_t a = 0; a < d; ++a) kern::axpy(r[a], r, cov.row(a).data(), d);
    }
    for (double& v : cov.data) v /= static_cast<double>(n - 1);

    double total_var = 0.0;
    for (std::size_t a = 0; a < d; ++a) total_var += cov.at(a, a);
    if (total_var < 1e-12) throw Error(ErrorKind::DegenerateData, "pca_fit: dataset is constant");

    std::vector<double> evals;
    Matrix evecs;
    jacobi_eigen_symmetric(cov, evals, evecs);

    model.components = Matrix(k, d);
    model.explained_variance.resize(k);
    for (std::size_t r = 0; r < k; ++r) {
        model.explained_variance[r] = std::max(0.0, evals[r]);
        auto src = evecs.row(r);
        // deterministic sign: largest-magnitude entry positive
        std::size_t arg = 0;
        for (std::size_t c = 1; c < d; ++c)
            if (std::abs(src[c]) > std::abs(src[arg])) arg = c;
        double sign = src[arg] < 0.0 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < d; ++c) model.components.at(r, c) = sign * src[c];
    }
    return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& x) {
    const std::size_t d = model.mean.size();
    if (x.cols != d) throw Error(ErrorKind::ShapeMismatch, "pca_transform: feature dimension mismatch");
    const std::size_t k = model.components.rows;
    Matrix out(x.rows, k);
    std::vector<double> c(d);
    for (std::size_t i = 0; i < x.rows; ++i) {
        kern::sub(x.row(i).data(), model.mean.data(), c.data(), d);
        for (std::size_t r = 0; r < k; ++r)
            out.at(i, r) = kern::dot(model.components.row(r).data(), c.data(), d);
    }
    return out;
}

}  // namespace fedgen
