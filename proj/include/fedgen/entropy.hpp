// Per-client entropy estimation: per-label VAE (2-D latent, full-covariance
// Gaussian posterior) trained on the ELBO, evaluated by K-sample IWAE.
#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedgen/datasets.hpp"

namespace fedgen {

struct VaeSpec {
    std::size_t input_dim = 0;
    std::size_t latent_dim = 2;
    std::size_t encoder_hidden = 16;  // 0 = linear encoder
    std::size_t decoder_hidden = 16;  // 0 = linear decoder
    enum class Likelihood { Bernoulli, Gaussian };  // Gaussian is the test-oracle mode
    Likelihood likelihood = Likelihood::Bernoulli;

    std::size_t tril_count() const { return latent_dim * (latent_dim + 1) / 2; }
    std::size_t param_count() const;
};

struct VaeParams {
    VaeSpec spec;
    std::vector<double> values;
};

struct VaeTrainConfig {
    std::size_t steps = 2000;
    double lr = 1e-3;
    std::size_t batch_size = 16;
    std::size_t mc_samples = 1;
};

VaeParams vae_init(const VaeSpec& spec, std::uint64_t seed);

// Reparameterized single-pass ELBO estimate plus its exact pathwise gradient
// for the sampled noise (KL term in closed form).
std::pair<double, std::vector<double>> elbo_and_grad(const VaeParams& vae,
                                                     const std::vector<Example>& batch,
                                                     std::size_t mc_samples, std::uint64_t seed);

VaeParams train_vae(const std::vector<Example>& examples, const VaeSpec& spec,
                    const VaeTrainConfig& cfg, std::uint64_t seed);

double iwae_log_evidence(const VaeParams& vae, const std::vector<double>& x, std::size_t k,
                         std::uint64_t seed);

struct ClientEntropy {
    std::map<std::string, double> per_client;  // nats
    std::map<std::string, std::size_t> n_examples;
    double mean = 0.0;
};

ClientEntropy client_entropy(const FederatedDataset& fd, std::size_t label, const VaeSpec& spec,
                             const VaeTrainConfig& cfg, std::size_t iwae_samples, std::uint64_t seed,
                             std::size_t min_examples = 8);

void write_entropy_csv(const ClientEntropy& e, std::size_t label, const std::string& path);
std::string entropy_csv_string(const ClientEntropy& e, std::size_t label);

}  // namespace fedgen
