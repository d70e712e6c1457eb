// Client partitioners: label-based Dirichlet and two-stage semantic
// (per-label GMM clustering + KL-cost bipartite matching chain).
#pragma once
#include <cstdint>
#include <vector>

#include "fedgen/datasets.hpp"
#include "fedgen/numerics.hpp"

namespace fedgen {

struct Gaussian {
    std::vector<double> mean;
    Matrix cov;  // d x d symmetric PSD
};

struct GaussianMixture {
    std::vector<std::pair<double, Gaussian>> components;  // (weight, component)
};

struct EmbedderConfig {
    enum class Kind { Raw, Pca, RandomProjection };
    Kind kind = Kind::Pca;
    std::size_t k = 16;
    std::uint64_t seed = 0;  // random projection only
};

struct GmmConfig {
    std::size_t max_iters = 200;
    double tol = 1e-6;
    double reg_scale = 1e-6;  // reg = reg_scale * mean feature variance
    std::uint64_t seed = 0;
};

FederatedDataset dirichlet_label_partition(const std::vector<Example>& pool, std::size_t num_labels,
                                           std::size_t num_clients, double alpha, std::uint64_t seed);

Matrix embed_examples(const std::vector<Example>& pool, const EmbedderConfig& cfg);

GaussianMixture gmm_fit(const Matrix& points, std::size_t num_components, std::size_t max_iters,
                        double tol, double reg, std::uint64_t seed);

std::vector<std::size_t> gmm_assign(const GaussianMixture& gmm, const Matrix& points);

// Closed-form KL(p || q) for multivariate Gaussians, via Cholesky of q.cov.
double gaussian_kl(const Gaussian& p, const Gaussian& q);

// Minimum-cost perfect matching (Hungarian); among minimizers, returns the
// lexicographically smallest row->column permutation.
std::vector<std::size_t> optimal_bipartite_match(const Matrix& cost);

FederatedDataset semantic_partition(const std::vector<Example>& pool, std::size_t num_labels,
                                    std::size_t num_clients, const EmbedderConfig& embedder,
                                    const GmmConfig& gmm_cfg, std::uint64_t seed);

// Per-iteration log-likelihoods of the last gmm_fit call on this thread;
// exposed for monotonicity checks.
const std::vector<double>& gmm_last_loglik_trace();

}  // namespace fedgen
