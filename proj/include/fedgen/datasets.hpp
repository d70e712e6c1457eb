// Federated dataset model, synthetic meta-distribution generator, JSON persistence.
#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedgen/error.hpp"

namespace fedgen {

struct Example {
    std::vector<double> x;
    std::size_t y = 0;

    bool operator==(const Example&) const = default;
};

struct ClientDataset {
    std::string id;
    double weight = 0.0;
    std::vector<Example> examples;
};

struct FederatedDataset {
    std::size_t num_labels = 0;
    std::size_t feature_dim = 0;
    std::map<std::string, ClientDataset> clients;  // keyed by client id

    std::size_t total_examples() const;
};

struct SyntheticMetaConfig {
    std::size_t num_labels = 4;
    std::size_t feature_dim = 8;
    std::size_t num_clients = 10;
    std::size_t examples_per_client = 32;
    double sigma_class = 1.0;    // spread of the global class means
    double sigma_client = 0.5;   // per-client shift of each class mean
    double sigma_within = 0.3;   // within-class noise
    double dirichlet_alpha = 1.0;  // per-client label-mix concentration
};

// Draw clients from a synthetic meta-distribution: global class means, a
// per-client per-class shift scaled by sigma_client, and a Dirichlet label
// mix per client. Features are rescaled to [0,1] per dimension.
FederatedDataset generate_synthetic(const SyntheticMetaConfig& cfg, std::uint64_t seed);

// Concatenate all client examples in ascending client-id order.
std::vector<Example> merge_clients(const FederatedDataset& fd);

FederatedDataset load_federated(const std::string& path);
void save_federated(const FederatedDataset& fd, const std::string& path);

FederatedDataset parse_federated_json(const std::string& text);
std::string federated_to_json(const FederatedDataset& fd);

}  // namespace fedgen
