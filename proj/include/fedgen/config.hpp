// Experiment configuration document: dataset source, partitioner, split,
// model, trainer, entropy, output paths.
#pragma once
#include <optional>
#include <string>

#include "fedgen/datasets.hpp"
#include "fedgen/entropy.hpp"
#include "fedgen/fedsim.hpp"
#include "fedgen/partition.hpp"

namespace fedgen {

struct PartitionerConfig {
    enum class Kind { Natural, Dirichlet, Semantic };
    Kind kind = Kind::Natural;
    double alpha = 0.5;          // dirichlet
    std::size_t clients = 10;    // dirichlet / semantic
    EmbedderConfig embedder;     // semantic
    GmmConfig gmm;               // semantic
};

struct SplitConfig {
    double unpart_frac = 0.2;
    double val_frac = 0.2;
};

struct EntropyConfig {
    std::size_t label = 0;
    VaeSpec vae;  // input_dim filled from the dataset
    VaeTrainConfig train;
    std::size_t iwae_samples = 1000;
    std::size_t min_examples = 8;
};

struct OutputsConfig {
    std::optional<std::string> metrics_csv;
    std::optional<std::string> dataset_out;
    std::optional<std::string> entropy_csv;
    std::optional<std::string> model_out;
    std::optional<std::string> split_prefix;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::optional<SyntheticMetaConfig> synthetic;
    std::optional<std::string> dataset_file;
    PartitionerConfig partitioner;
    SplitConfig split;
    ModelSpec model;  // input_dim/num_classes filled from the dataset when 0
    bool federated = true;
    TrainConfig fed_train;
    CentralizedConfig cen_train;
    std::optional<EntropyConfig> entropy;
    OutputsConfig outputs;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& text);

// Model parameter persistence (JSON document).
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

int run_cli(int argc, char** argv);

}  // namespace fedgen
