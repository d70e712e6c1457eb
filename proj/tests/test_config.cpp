#include <doctest.h>

#include <cstdio>
#include <functional>

#include "fedgen/config.hpp"

using namespace fedgen;

namespace {

std::string msg_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("parse_config_json: minimal document fills defaults") {
    ExperimentConfig cfg = parse_config_json(R"({"dataset":{"synthetic":{}}})");
    REQUIRE(cfg.synthetic.has_value());
    CHECK(cfg.synthetic->num_labels == 4);
    CHECK(cfg.synthetic->num_clients == 10);
    CHECK(cfg.seed == 0);
    CHECK(cfg.partitioner.kind == PartitionerConfig::Kind::Natural);
    CHECK(cfg.split.unpart_frac == 0.2);
    CHECK(cfg.split.val_frac == 0.2);
    CHECK(cfg.model.kind == ModelSpec::Kind::Linear);
    CHECK(cfg.federated);
    CHECK(cfg.fed_train.server.momentum == 0.9);
    CHECK(cfg.fed_train.server.epsilon == 1e-4);
    CHECK_FALSE(cfg.entropy.has_value());
    CHECK_FALSE(cfg.outputs.metrics_csv.has_value());
}

TEST_CASE("parse_config_json: full document round trips into the structs") {
    const char* doc = R"({
        "seed": 7,
        "dataset": {"synthetic": {"num_labels": 3, "feature_dim": 6, "num_clients": 12,
                                  "examples_per_client": 40, "sigma_client": 1.5}},
        "partitioner": {"kind": "dirichlet", "alpha": 0.3, "clients": 8},
        "split": {"unpart_frac": 0.25, "val_frac": 0.1},
        "model": {"kind": "mlp", "hidden_units": 24},
        "trainer": {"federated": {
            "rounds": 60, "clients_per_round": 4, "eval_every": 5, "rho_mode": "uniform",
            "percentiles": true,
            "client": {"local_epochs": 2, "batch_size": 10, "lr": 0.05},
            "server": {"kind": "fedadam", "lr": 0.7, "beta2": 0.95, "epsilon": 0.001,
                       "decay": {"factor": 0.2, "every_rounds": 30}}}},
        "entropy": {"label": 1, "steps": 500, "iwae_samples": 200,
                    "vae": {"latent_dim": 3, "encoder_hidden": 0, "decoder_hidden": 0}},
        "outputs": {"metrics_csv": "m.csv", "entropy_csv": "e.csv"}
    })";
    ExperimentConfig cfg = parse_config_json(doc);
    CHECK(cfg.seed == 7);
    CHECK(cfg.synthetic->sigma_client == 1.5);
    CHECK(cfg.partitioner.kind == PartitionerConfig::Kind::Dirichlet);
    CHECK(cfg.partitioner.alpha == 0.3);
    CHECK(cfg.partitioner.clients == 8);
    CHECK(cfg.split.val_frac == 0.1);
    CHECK(cfg.model.kind == ModelSpec::Kind::Mlp);
    CHECK(cfg.model.hidden_units == 24);
    CHECK(cfg.fed_train.rounds == 60);
    CHECK(cfg.fed_train.rho_mode == RhoMode::Uniform);
    CHECK(cfg.fed_train.percentiles);
    CHECK(cfg.fed_train.client.client_lr == 0.05);
    CHECK(cfg.fed_train.server.kind == ServerOptConfig::Kind::FedAdam);
    CHECK(cfg.fed_train.server.beta2 == 0.95);
    CHECK(cfg.fed_train.server.decay.factor == 0.2);
    CHECK(cfg.fed_train.server.decay.every_rounds == 30);
    CHECK(cfg.fed_train.seed == 7);
    REQUIRE(cfg.entropy.has_value());
    CHECK(cfg.entropy->label == 1);
    CHECK(cfg.entropy->train.steps == 500);
    CHECK(cfg.entropy->iwae_samples == 200);
    CHECK(cfg.entropy->vae.latent_dim == 3);
    CHECK(cfg.outputs.metrics_csv == "m.csv");
    CHECK(cfg.outputs.entropy_csv == "e.csv");
    CHECK_FALSE(cfg.outputs.model_out.has_value());
}

TEST_CASE("parse_config_json: errors carry the field path") {
    auto err = msg_of([] {
        parse_config_json(R"({"dataset":{"synthetic":{}},"split":{"val_frac":1.5}})");
    });
    CHECK(err.find("split.val_frac") != std::string::npos);

    err = msg_of([] {
        parse_config_json(R"({"dataset":{"synthetic":{},"file":"x.json"}})");
    });
    CHECK(err.find("dataset") != std::string::npos);

    CHECK_THROWS_AS(parse_config_json("not json"), Error);
    CHECK_THROWS_AS(parse_config_json(R"({})"), Error);
    CHECK_THROWS_AS(parse_config_json(R"({"dataset":{"synthetic":{"dirichlet_alpha":0}}})"), Error);
    CHECK_THROWS_AS(
        parse_config_json(R"({"dataset":{"synthetic":{}},"partitioner":{"kind":"bogus"}})"), Error);
    CHECK_THROWS_AS(
        parse_config_json(R"({"dataset":{"synthetic":{}},"partitioner":{"kind":"dirichlet"}})"),
        Error);  // missing clients
    CHECK_THROWS_AS(parse_config_json(
                        R"({"dataset":{"synthetic":{}},"trainer":{"federated":{},"centralized":{}}})"),
                    Error);
    CHECK_THROWS_AS(
        parse_config_json(
            R"({"dataset":{"synthetic":{}},"trainer":{"federated":{"server":{"momentum":1.0}}}})"),
        Error);
    CHECK_THROWS_AS(parse_config_json(R"({"dataset":{"synthetic":{}},"seed":-3})"), Error);
}

TEST_CASE("save_model / load_model: exact round trip and validation") {
    ModelSpec spec{ModelSpec::Kind::Mlp, 5, 3, 4};
    ModelParams p = init_params(spec, 77);
    const std::string path = "/tmp/fedgen_test_model.json";
    save_model(p, path);
    ModelParams back = load_model(path);
    CHECK(back.spec.kind == spec.kind);
    CHECK(back.spec.hidden_units == 5);
    CHECK(back.spec.input_dim == 3);
    CHECK(back.spec.num_classes == 4);
    CHECK(back.values == p.values);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_model("/tmp/fedgen_no_such_model.json"), Error);
}
