// Federated and centralized training loops: client sampling, local SGD,
// delta aggregation, FedAvgM / FedAdam server steps.
#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedgen/metrics.hpp"
#include "fedgen/models.hpp"
#include "fedgen/numerics.hpp"
#include "fedgen/split.hpp"

namespace fedgen {

struct ClientOptConfig {
    std::size_t local_epochs = 1;
    std::size_t batch_size = 20;
    double client_lr = 0.1;
};

struct LrDecay {
    double factor = 1.0;       // multiply lr by this...
    std::size_t every_rounds = 0;  // ...every this many rounds (0 = off)
};

struct ServerOptConfig {
    enum class Kind { FedAvgM, FedAdam };
    Kind kind = Kind::FedAvgM;
    double server_lr = 1.0;
    double momentum = 0.9;  // fedavgm
    double beta1 = 0.9, beta2 = 0.99, epsilon = 1e-4;  // fedadam
    LrDecay decay;
};

struct ServerState {
    ModelParams params;
    std::vector<double> m;  // first moment / momentum buffer
    std::vector<double> v;  // second moment (fedadam)
    std::size_t round = 0;
};

struct TrainConfig {
    std::size_t rounds = 100;
    std::size_t clients_per_round = 10;
    ClientOptConfig client;
    ServerOptConfig server;
    std::size_t eval_every = 10;
    RhoMode rho_mode = RhoMode::SizeProportional;
    bool percentiles = false;
    std::uint64_t seed = 0;
};

struct CentralizedConfig {
    enum class Optimizer { SgdMomentum, Adam };
    Optimizer optimizer = Optimizer::SgdMomentum;
    double lr = 0.1;
    double momentum = 0.9;
    double beta1 = 0.9, beta2 = 0.99, epsilon = 1e-4;
    std::size_t epochs = 50;
    std::size_t batch_size = 20;
    std::size_t eval_every = 5;
    RhoMode rho_mode = RhoMode::SizeProportional;
    bool percentiles = false;
    std::uint64_t seed = 0;
};

// m distinct ids drawn from substream (seed, "sample", round), sorted ascending.
std::vector<std::string> sample_clients(const std::vector<std::string>& ids, std::size_t m,
                                        std::size_t round, std::uint64_t seed);

// E epochs of shuffled mini-batch SGD from params; returns (delta, example count).
std::pair<std::vector<double>, std::size_t> client_update(const ModelParams& params,
                                                          const std::vector<Example>& train,
                                                          const ClientOptConfig& cfg, SeededRng rng);

// Weighted mean of deltas, accumulated in input order.
std::vector<double> aggregate_deltas(const std::vector<std::pair<std::vector<double>, double>>& pairs);

void server_step_fedavgm(ServerState& state, const std::vector<double>& mean_delta,
                         const ServerOptConfig& cfg);
void server_step_fedadam(ServerState& state, const std::vector<double>& mean_delta,
                         const ServerOptConfig& cfg);

MetricsLog run_federated(const ThreeWaySplit& split, const ModelSpec& spec, const TrainConfig& cfg);
MetricsLog run_centralized(const ThreeWaySplit& split, const ModelSpec& spec,
                           const CentralizedConfig& cfg);

// Same loops but also returning the final parameters (used by the CLI to
// persist a trained model).
MetricsLog run_federated(const ThreeWaySplit& split, const ModelSpec& spec, const TrainConfig& cfg,
                         ModelParams* final_params);
MetricsLog run_centralized(const ThreeWaySplit& split, const ModelSpec& spec,
                           const CentralizedConfig& cfg, ModelParams* final_params);

// Worker-thread cap: FEDGEN_THREADS env var (0 or unset = auto).
std::size_t worker_thread_count();

}  // namespace fedgen
