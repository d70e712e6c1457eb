// Small differentiable classifiers: softmax-linear and one-hidden-layer tanh MLP.
#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedgen/datasets.hpp"

namespace fedgen {

struct ModelSpec {
    enum class Kind { Linear, Mlp };
    Kind kind = Kind::Linear;
    std::size_t hidden_units = 0;  // mlp only
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;

    std::size_t param_count() const;
};

struct ModelParams {
    ModelSpec spec;
    std::vector<double> values;
};

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

// Mean cross-entropy over the batch.
double loss(const ModelParams& params, std::span<const Example> batch);

// Exact gradient of loss.
std::vector<double> grad(const ModelParams& params, std::span<const Example> batch);

// Argmax logit, ties to the lowest class index.
std::size_t predict(const ModelParams& params, std::span<const double> x);

// Central-difference gradient; independent oracle for grad().
std::vector<double> finite_diff_grad(const ModelParams& params, std::span<const Example> batch, double h);

}  // namespace fedgen
