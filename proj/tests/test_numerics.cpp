#include <doctest.h>

#include <cmath>
#include <set>

#include "fedgen/numerics.hpp"

using namespace fedgen;

namespace {
Matrix make(std::size_t r, std::size_t c, std::initializer_list<double> vals) {
    Matrix m(r, c);
    std::copy(vals.begin(), vals.end(), m.data.begin());
    return m;
}
}  // namespace

TEST_CASE("cholesky: identity") {
    Matrix l = cholesky(Matrix::identity(3));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(l.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
}

TEST_CASE("cholesky: hand example") {
    Matrix a = make(2, 2, {4, 2, 2, 3});
    Matrix l = cholesky(a);
    CHECK(l.at(0, 0) == doctest::Approx(2.0));
    CHECK(l.at(0, 1) == 0.0);
    CHECK(l.at(1, 0) == doctest::Approx(1.0));
    CHECK(l.at(1, 1) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("cholesky: indefinite input throws") {
    Matrix a = make(2, 2, {1, 2, 2, 1});
    CHECK_THROWS_AS(cholesky(a), Error);
    try {
        cholesky(a);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotPositiveDefinite);
    }
}

TEST_CASE("cholesky: round trip on random PSD matrices") {
    SeededRng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 2 + rng.next_below(6);
        Matrix m(n, n);
        for (double& v : m.data) v = rng.next_normal();
        Matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0;
                for (std::size_t k = 0; k < n; ++k) s += m.at(k, i) * m.at(k, j);
                a.at(i, j) = s + (i == j ? 1e-6 : 0.0);
            }
        Matrix l = cholesky(a);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0;
                for (std::size_t k = 0; k < n; ++k) s += l.at(i, k) * l.at(j, k);
                CHECK(std::abs(s - a.at(i, j)) < 1e-9);
            }
    }
}

TEST_CASE("log_sum_exp basics") {
    std::vector<double> single = {0.0};
    CHECK(log_sum_exp(single) == doctest::Approx(0.0));

    std::vector<double> v = {std::log(1.0), std::log(2.0), std::log(3.0)};
    CHECK(log_sum_exp(v) == doctest::Approx(std::log(6.0)));

    std::vector<double> big = {1000.0, 1000.0};
    CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));

    std::vector<double> empty;
    CHECK_THROWS_AS(log_sum_exp(empty), Error);
}

TEST_CASE("log_sum_exp shift identity") {
    SeededRng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + rng.next_below(10));
        for (double& x : v) x = 10.0 * rng.next_normal();
        double c = 5.0 * rng.next_normal();
        std::vector<double> shifted = v;
        for (double& x : shifted) x += c;
        CHECK(std::abs(log_sum_exp(shifted) - (log_sum_exp(v) + c)) < 1e-12);
    }
}

TEST_CASE("pca_fit: noise-free line y = 2x") {
    Matrix x(6, 2);
    for (std::size_t i = 0; i < 6; ++i) {
        double t = static_cast<double>(i) - 2.5;
        x.at(i, 0) = t;
        x.at(i, 1) = 2.0 * t;
    }
    PcaModel m = pca_fit(x, 2);
    double inv_sqrt5 = 1.0 / std::sqrt(5.0);
    CHECK(std::abs(std::abs(m.components.at(0, 0)) - inv_sqrt5) < 1e-8);
    CHECK(std::abs(std::abs(m.components.at(0, 1)) - 2.0 * inv_sqrt5) < 1e-8);
    CHECK(m.components.at(0, 1) > 0);  // sign convention: largest entry positive
    CHECK(m.explained_variance[1] == doctest::Approx(0.0).epsilon(1e-8));

    // projection of (1,2) with the model's mean at the origin
    Matrix p(1, 2);
    p.at(0, 0) = 1.0;
    p.at(0, 1) = 2.0;
    Matrix z = pca_transform(m, p);
    CHECK(std::abs(z.at(0, 0)) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("pca_fit: constant dataset throws DegenerateData") {
    Matrix x(4, 3, 1.5);
    CHECK_THROWS_AS(pca_fit(x, 1), Error);
}

TEST_CASE("pca_fit: components orthonormal, projected covariance diagonal") {
    SeededRng rng(77);
    std::size_t n = 40, d = 6, k = 4;
    Matrix x(n, d);
    for (double& v : x.data) v = rng.next_normal();
    PcaModel m = pca_fit(x, k);

    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
            double dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += m.components.at(a, c) * m.components.at(b, c);
            CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-8);
        }

    Matrix z = pca_transform(m, x);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
            double mean_a = 0, mean_b = 0;
            for (std::size_t i = 0; i < n; ++i) {
                mean_a += z.at(i, a);
                mean_b += z.at(i, b);
            }
            mean_a /= n;
            mean_b /= n;
            double cov = 0;
            for (std::size_t i = 0; i < n; ++i) cov += (z.at(i, a) - mean_a) * (z.at(i, b) - mean_b);
            cov /= (n - 1);
            if (a == b)
                CHECK(cov == doctest::Approx(m.explained_variance[a]).epsilon(1e-6));
            else
                CHECK(std::abs(cov) < 1e-8);
        }
    // explained variance sorted descending
    for (std::size_t a = 1; a < k; ++a) CHECK(m.explained_variance[a - 1] >= m.explained_variance[a]);
}

TEST_CASE("pca: transform of the mean is zero; full-rank reconstruction") {
    SeededRng rng(5);
    Matrix x(20, 4);
    for (double& v : x.data) v = rng.next_normal();
    PcaModel m = pca_fit(x, 4);

    Matrix mean_row(1, 4);
    std::copy(m.mean.begin(), m.mean.end(), mean_row.data.begin());
    Matrix z0 = pca_transform(m, mean_row);
    for (double v : z0.data) CHECK(std::abs(v) < 1e-12);

    Matrix z = pca_transform(m, x);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t c = 0; c < 4; ++c) {
            double rec = m.mean[c];
            for (std::size_t r = 0; r < 4; ++r) rec += m.components.at(r, c) * z.at(i, r);
            CHECK(std::abs(rec - x.at(i, c)) < 1e-8);
        }
}

TEST_CASE("pca_transform: shape mismatch throws") {
    Matrix x(5, 3);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<double>(i);
    PcaModel m = pca_fit(x, 2);
    Matrix bad(1, 4, 0.0);
    CHECK_THROWS_AS(pca_transform(m, bad), Error);
}

TEST_CASE("SeededRng: identical paths replay, distinct paths diverge") {
    SeededRng a(99), b(99);
    auto s1 = a.derive("alpha", 3);
    auto s2 = b.derive("alpha", 3);
    for (int i = 0; i < 100; ++i) CHECK(s1.next_u64() == s2.next_u64());

    auto d1 = SeededRng(99).derive("alpha", 3);
    auto d2 = SeededRng(99).derive("alpha", 4);
    auto d3 = SeededRng(99).derive("beta", 3);
    auto d4 = SeededRng(100).derive("alpha", 3);
    std::set<std::uint64_t> firsts = {d1.next_u64(), d2.next_u64(), d3.next_u64(), d4.next_u64()};
    CHECK(firsts.size() == 4);
}

TEST_CASE("SeededRng: sampling helpers are sane") {
    SeededRng rng(1);
    auto idx = rng.sample_without_replacement(10, 4);
    CHECK(idx.size() == 4);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 4);
    for (auto i : idx) CHECK(i < 10);

    // dirichlet draws are simplex points
    auto q = rng.next_dirichlet({0.5, 1.0, 2.0});
    double total = 0;
    for (double v : q) {
        CHECK(v >= 0.0);
        total += v;
    }
    CHECK(total == doctest::Approx(1.0));

    // gamma mean sanity: Gamma(k,1) has mean k
    double acc = 0;
    for (int i = 0; i < 4000; ++i) acc += rng.next_gamma(3.0);
    CHECK(acc / 4000.0 == doctest::Approx(3.0).epsilon(0.1));
}
