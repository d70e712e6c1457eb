#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "fedgen/config.hpp"
#include "fedgen/metrics.hpp"
#include "fedgen/split.hpp"

namespace fedgen {

namespace {

FederatedDataset load_source(const ExperimentConfig& cfg) {
    if (cfg.synthetic) return generate_synthetic(*cfg.synthetic, cfg.seed);
    return load_federated(*cfg.dataset_file);
}

FederatedDataset apply_partitioner(const ExperimentConfig& cfg, const FederatedDataset& fd) {
    switch (cfg.partitioner.kind) {
        case PartitionerConfig::Kind::Natural:
            return fd;
        case PartitionerConfig::Kind::Dirichlet: {
            auto pool = merge_clients(fd);
            return dirichlet_label_partition(pool, fd.num_labels, cfg.partitioner.clients,
                                             cfg.partitioner.alpha, cfg.seed);
        }
        case PartitionerConfig::Kind::Semantic: {
            auto pool = merge_clients(fd);
            return semantic_partition(pool, fd.num_labels, cfg.partitioner.clients,
                                      cfg.partitioner.embedder, cfg.partitioner.gmm, cfg.seed);
        }
    }
    throw Error(ErrorKind::InvalidConfig, "unknown partitioner");
}

ModelSpec resolve_model(const ExperimentConfig& cfg, const FederatedDataset& fd) {
    ModelSpec spec = cfg.model;
    if (spec.input_dim == 0) spec.input_dim = fd.feature_dim;
    if (spec.num_classes == 0) spec.num_classes = fd.num_labels;
    return spec;
}

void save_split_files(const ThreeWaySplit& split, const FederatedDataset& fd,
                      const std::string& prefix) {
    auto block_to_fd = [&](const std::map<std::string, std::vector<Example>>& block) {
        FederatedDataset out;
        out.num_labels = fd.num_labels;
        out.feature_dim = fd.feature_dim;
        for (const auto& [id, examples] : block) {
            if (examples.empty()) continue;
            ClientDataset cd;
            cd.id = id;
            cd.examples = examples;
            auto w = split.weights.find(id);
            cd.weight = w != split.weights.end() ? w->second : static_cast<double>(examples.size());
            out.clients.emplace(id, std::move(cd));
        }
        return out;
    };
    save_federated(block_to_fd(split.part_train), prefix + "part_train.json");
    save_federated(block_to_fd(split.part_val), prefix + "part_val.json");
    save_federated(block_to_fd(split.unpart), prefix + "unpart.json");
}

void report_records(const MetricsLog& log) {
    for (const auto& r : log.records)
        std::fprintf(stderr, "round %zu: part_val_acc=%.4f unpart_acc=%.4f part_gap_acc=%.4f\n",
                     r.index, r.part_val_acc, r.unpart_acc, r.part_gap_acc);
}

MetricsLog train_and_save(const ExperimentConfig& cfg, const ThreeWaySplit& split,
                          const ModelSpec& spec) {
    ModelParams final_params;
    MetricsLog log = cfg.federated ? run_federated(split, spec, cfg.fed_train, &final_params)
                                   : run_centralized(split, spec, cfg.cen_train, &final_params);
    report_records(log);
    if (cfg.outputs.metrics_csv) write_metrics_csv(log, *cfg.outputs.metrics_csv);
    if (cfg.outputs.model_out) save_model(final_params, *cfg.outputs.model_out);
    return log;
}

void run_entropy(const ExperimentConfig& cfg, const FederatedDataset& fd) {
    if (!cfg.entropy) throw Error(ErrorKind::InvalidConfig, "config has no 'entropy' section");
    EntropyConfig ec = *cfg.entropy;
    ec.vae.input_dim = fd.feature_dim;
    auto result = client_entropy(fd, ec.label, ec.vae, ec.train, ec.iwae_samples,
                                 SeededRng(cfg.seed).derive("entropy_seed").next_u64(),
                                 ec.min_examples);
    std::fprintf(stderr, "entropy: %zu clients, mean %.4f nats\n", result.per_client.size(),
                 result.mean);
    if (cfg.outputs.entropy_csv) write_entropy_csv(result, ec.label, *cfg.outputs.entropy_csv);
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"fedgen: federated-learning generalization simulator"};
    app.require_subcommand(1);

    std::string config_path, out_override, model_path;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config file")->required();
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic federated dataset");
    add_common(synth);
    synth->add_option("--out", out_override, "output dataset path (overrides outputs.dataset_out)");

    auto* part = app.add_subcommand("partition", "partition the dataset pool into clients");
    add_common(part);
    part->add_option("--out", out_override, "output dataset path (overrides outputs.dataset_out)");

    auto* split_cmd = app.add_subcommand("split", "write the three-way split as dataset files");
    add_common(split_cmd);

    auto* train = app.add_subcommand("train", "train and write the metrics CSV");
    add_common(train);

    auto* eval = app.add_subcommand("eval", "evaluate a saved model on the three-way split");
    add_common(eval);
    eval->add_option("--model", model_path, "model file (overrides outputs.model_out)");

    auto* entropy_cmd = app.add_subcommand("entropy", "estimate per-client entropy");
    add_common(entropy_cmd);

    auto* pipeline = app.add_subcommand("pipeline", "full chain: dataset -> partition -> split -> train -> entropy");
    add_common(pipeline);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        ExperimentConfig cfg = parse_config(config_path);
        if (!out_override.empty()) cfg.outputs.dataset_out = out_override;
        if (!model_path.empty()) cfg.outputs.model_out = model_path;

        if (synth->parsed()) {
            if (!cfg.synthetic)
                throw Error(ErrorKind::InvalidConfig, "synth requires a synthetic dataset source");
            FederatedDataset fd = generate_synthetic(*cfg.synthetic, cfg.seed);
            if (!cfg.outputs.dataset_out)
                throw Error(ErrorKind::InvalidConfig, "synth requires outputs.dataset_out (or --out)");
            save_federated(fd, *cfg.outputs.dataset_out);
            std::fprintf(stderr, "wrote %zu clients, %zu examples to %s\n", fd.clients.size(),
                         fd.total_examples(), cfg.outputs.dataset_out->c_str());
        } else if (part->parsed()) {
            FederatedDataset fd = apply_partitioner(cfg, load_source(cfg));
            if (!cfg.outputs.dataset_out)
                throw Error(ErrorKind::InvalidConfig, "partition requires outputs.dataset_out (or --out)");
            save_federated(fd, *cfg.outputs.dataset_out);
            std::fprintf(stderr, "wrote %zu clients to %s\n", fd.clients.size(),
                         cfg.outputs.dataset_out->c_str());
        } else if (split_cmd->parsed()) {
            FederatedDataset fd = apply_partitioner(cfg, load_source(cfg));
            auto split = three_way_split(fd, cfg.split.unpart_frac, cfg.split.val_frac, cfg.seed);
            if (!cfg.outputs.split_prefix)
                throw Error(ErrorKind::InvalidConfig, "split requires outputs.split_prefix");
            save_split_files(split, fd, *cfg.outputs.split_prefix);
        } else if (train->parsed()) {
            FederatedDataset fd = apply_partitioner(cfg, load_source(cfg));
            if (cfg.outputs.dataset_out) save_federated(fd, *cfg.outputs.dataset_out);
            auto split = three_way_split(fd, cfg.split.unpart_frac, cfg.split.val_frac, cfg.seed);
            train_and_save(cfg, split, resolve_model(cfg, fd));
        } else if (eval->parsed()) {
            if (!cfg.outputs.model_out)
                throw Error(ErrorKind::InvalidConfig, "eval requires outputs.model_out (or --model)");
            ModelParams params = load_model(*cfg.outputs.model_out);
            FederatedDataset fd = apply_partitioner(cfg, load_source(cfg));
            auto split = three_way_split(fd, cfg.split.unpart_frac, cfg.split.val_frac, cfg.seed);
            RhoMode rho = cfg.federated ? cfg.fed_train.rho_mode : cfg.cen_train.rho_mode;
            MetricsLog log;
            log.records.push_back(make_record(0, params, split, rho, true));
            report_records(log);
            if (cfg.outputs.metrics_csv) write_metrics_csv(log, *cfg.outputs.metrics_csv);
        } else if (entropy_cmd->parsed()) {
            FederatedDataset fd = apply_partitioner(cfg, load_source(cfg));
            run_entropy(cfg, fd);
        } else if (pipeline->parsed()) {
            FederatedDataset fd = apply_partitioner(cfg, load_source(cfg));
            if (cfg.outputs.dataset_out) save_federated(fd, *cfg.outputs.dataset_out);
            auto split = three_way_split(fd, cfg.split.unpart_frac, cfg.split.val_frac, cfg.seed);
            if (cfg.outputs.split_prefix) save_split_files(split, fd, *cfg.outputs.split_prefix);
            train_and_save(cfg, split, resolve_model(cfg, fd));
            if (cfg.entropy) run_entropy(cfg, fd);
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace fedgen
