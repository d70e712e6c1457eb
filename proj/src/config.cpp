#include "fedgen/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fedgen {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& reason) {
    throw Error(ErrorKind::ParseError, "config field '" + field + "': " + reason);
}

double get_num(const json& j, const std::string& path, const char* key, double fallback,
               bool required = false) {
    if (!j.contains(key)) {
        if (required) fail(path + "." + key, "missing");
        return fallback;
    }
    if (!j.at(key).is_number()) fail(path + "." + key, "expected a number");
    return j.at(key).get<double>();
}

std::size_t get_count(const json& j, const std::string& path, const char* key, std::size_t fallback,
                      bool required = false) {
    if (!j.contains(key)) {
        if (required) fail(path + "." + key, "missing");
        return fallback;
    }
    if (!j.at(key).is_number_unsigned()) fail(path + "." + key, "expected a non-negative integer");
    return j.at(key).get<std::size_t>();
}

std::string get_str(const json& j, const std::string& path, const char* key, const std::string& fallback,
                    bool required = false) {
    if (!j.contains(key)) {
        if (required) fail(path + "." + key, "missing");
        return fallback;
    }
    if (!j.at(key).is_string()) fail(path + "." + key, "expected a string");
    return j.at(key).get<std::string>();
}

RhoMode parse_rho(const json& j, const std::string& path) {
    std::string s = get_str(j, path, "rho_mode", "size_proportional");
    if (s == "uniform") return RhoMode::Uniform;
    if (s == "size_proportional") return RhoMode::SizeProportional;
    fail(path + ".rho_mode", "expected 'uniform' or 'size_proportional'");
}

EmbedderConfig parse_embedder(const json& j, const std::string& path) {
    EmbedderConfig e;
    std::string kind = get_str(j, path, "kind", "pca");
    if (kind == "raw")
        e.kind = EmbedderConfig::Kind::Raw;
    else if (kind == "pca")
        e.kind = EmbedderConfig::Kind::Pca;
    else if (kind == "random_projection")
        e.kind = EmbedderConfig::Kind::RandomProjection;
    else
        fail(path + ".kind", "unknown embedder '" + kind + "'");
    e.k = get_count(j, path, "k", 16);
    if (e.k < 1 && e.kind != EmbedderConfig::Kind::Raw) fail(path + ".k", "must be >= 1");
    e.seed = get_count(j, path, "seed", 0);
    return e;
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("config parse error: ") + e.what());
    }

    ExperimentConfig cfg;
    cfg.seed = get_count(doc, "", "seed", 0);

    if (!doc.contains("dataset")) fail("dataset", "missing");
    const json& ds = doc.at("dataset");
    bool has_synth = ds.contains("synthetic"), has_file = ds.contains("file");
    if (has_synth == has_file) fail("dataset", "exactly one of 'synthetic' or 'file' required");
    if (has_synth) {
        const json& s = ds.at("synthetic");
        SyntheticMetaConfig m;
        m.num_labels = get_count(s, "dataset.synthetic", "num_labels", m.num_labels);
        m.feature_dim = get_count(s, "dataset.synthetic", "feature_dim", m.feature_dim);
        m.num_clients = get_count(s, "dataset.synthetic", "num_clients", m.num_clients);
        m.examples_per_client = get_count(s, "dataset.synthetic", "examples_per_client", m.examples_per_client);
        m.sigma_class = get_num(s, "dataset.synthetic", "sigma_class", m.sigma_class);
        m.sigma_client = get_num(s, "dataset.synthetic", "sigma_client", m.sigma_client);
        m.sigma_within = get_num(s, "dataset.synthetic", "sigma_within", m.sigma_within);
        m.dirichlet_alpha = get_num(s, "dataset.synthetic", "dirichlet_alpha", m.dirichlet_alpha);
        if (m.sigma_class < 0 || m.sigma_client < 0 || m.sigma_within < 0)
            fail("dataset.synthetic", "sigmas must be >= 0");
        if (m.dirichlet_alpha <= 0) fail("dataset.synthetic.dirichlet_alpha", "must be > 0");
        cfg.synthetic = m;
    } else {
        cfg.dataset_file = ds.at("file").get<std::string>();
    }

    if (doc.contains("partitioner")) {
        const json& p = doc.at("partitioner");
        std::string kind = get_str(p, "partitioner", "kind", "natural");
        if (kind == "natural") {
            cfg.partitioner.kind = PartitionerConfig::Kind::Natural;
        } else if (kind == "dirichlet") {
            cfg.partitioner.kind = PartitionerConfig::Kind::Dirichlet;
            cfg.partitioner.alpha = get_num(p, "partitioner", "alpha", 0.5);
            if (cfg.partitioner.alpha <= 0) fail("partitioner.alpha", "must be > 0");
            cfg.partitioner.clients = get_count(p, "partitioner", "clients", 10, true);
        } else if (kind == "semantic") {
            cfg.partitioner.kind = PartitionerConfig::Kind::Semantic;
            cfg.partitioner.clients = get_count(p, "partitioner", "clients", 10, true);
            if (p.contains("embedder"))
                cfg.partitioner.embedder = parse_embedder(p.at("embedder"), "partitioner.embedder");
            if (p.contains("gmm")) {
                const json& g = p.at("gmm");
                cfg.partitioner.gmm.max_iters = get_count(g, "partitioner.gmm", "max_iters", 200);
                cfg.partitioner.gmm.tol = get_num(g, "partitioner.gmm", "tol", 1e-6);
                cfg.partitioner.gmm.reg_scale = get_num(g, "partitioner.gmm", "reg_scale", 1e-6);
            }
        } else {
            fail("partitioner.kind", "unknown partitioner '" + kind + "'");
        }
        if (cfg.partitioner.kind != PartitionerConfig::Kind::Natural && cfg.partitioner.clients < 1)
            fail("partitioner.clients", "must be >= 1");
    }

    if (doc.contains("split")) {
        const json& s = doc.at("split");
        cfg.split.unpart_frac = get_num(s, "split", "unpart_frac", 0.2);
        cfg.split.val_frac = get_num(s, "split", "val_frac", 0.2);
    }
    if (cfg.split.unpart_frac < 0 || cfg.split.unpart_frac >= 1)
        fail("split.unpart_frac", "must lie in [0, 1)");
    if (cfg.split.val_frac <= 0 || cfg.split.val_frac >= 1) fail("split.val_frac", "must lie in (0, 1)");

    if (doc.contains("model")) {
        const json& m = doc.at("model");
        std::string kind = get_str(m, "model", "kind", "linear");
        if (kind == "linear") {
            cfg.model.kind = ModelSpec::Kind::Linear;
        } else if (kind == "mlp") {
            cfg.model.kind = ModelSpec::Kind::Mlp;
            cfg.model.hidden_units = get_count(m, "model", "hidden_units", 16);
            if (cfg.model.hidden_units < 1) fail("model.hidden_units", "must be >= 1");
        } else {
            fail("model.kind", "unknown model '" + kind + "'");
        }
    }

    if (doc.contains("trainer")) {
        const json& t = doc.at("trainer");
        bool fed = t.contains("federated"), cen = t.contains("centralized");
        if (fed == cen) fail("trainer", "exactly one of 'federated' or 'centralized' required");
        cfg.federated = fed;
        if (fed) {
            const json& f = t.at("federated");
            TrainConfig& tc = cfg.fed_train;
            tc.rounds = get_count(f, "trainer.federated", "rounds", 100);
            tc.clients_per_round = get_count(f, "trainer.federated", "clients_per_round", 10);
            tc.eval_every = get_count(f, "trainer.federated", "eval_every", 10);
            tc.rho_mode = parse_rho(f, "trainer.federated");
            if (f.contains("percentiles")) tc.percentiles = f.at("percentiles").get<bool>();
            if (f.contains("client")) {
                const json& c = f.at("client");
                tc.client.local_epochs = get_count(c, "trainer.federated.client", "local_epochs", 1);
                tc.client.batch_size = get_count(c, "trainer.federated.client", "batch_size", 20);
                tc.client.client_lr = get_num(c, "trainer.federated.client", "lr", 0.1);
            }
            if (f.contains("server")) {
                const json& s = f.at("server");
                std::string kind = get_str(s, "trainer.federated.server", "kind", "fedavgm");
                if (kind == "fedavgm")
                    tc.server.kind = ServerOptConfig::Kind::FedAvgM;
                else if (kind == "fedadam")
                    tc.server.kind = ServerOptConfig::Kind::FedAdam;
                else
                    fail("trainer.federated.server.kind", "unknown optimizer '" + kind + "'");
                tc.server.server_lr = get_num(s, "trainer.federated.server", "lr", 1.0);
                tc.server.momentum = get_num(s, "trainer.federated.server", "momentum", 0.9);
                tc.server.beta1 = get_num(s, "trainer.federated.server", "beta1", 0.9);
                tc.server.beta2 = get_num(s, "trainer.federated.server", "beta2", 0.99);
                tc.server.epsilon = get_num(s, "trainer.federated.server", "epsilon", 1e-4);
                if (tc.server.momentum < 0 || tc.server.momentum >= 1)
                    fail("trainer.federated.server.momentum", "must lie in [0, 1)");
                if (tc.server.epsilon <= 0) fail("trainer.federated.server.epsilon", "must be > 0");
                if (s.contains("decay")) {
                    const json& d = s.at("decay");
                    tc.server.decay.factor = get_num(d, "trainer.federated.server.decay", "factor", 1.0);
                    tc.server.decay.every_rounds =
                        get_count(d, "trainer.federated.server.decay", "every_rounds", 0);
                }
            }
            tc.seed = cfg.seed;
        } else {
            const json& c = t.at("centralized");
            CentralizedConfig& cc = cfg.cen_train;
            std::string opt = get_str(c, "trainer.centralized", "optimizer", "sgd_momentum");
            if (opt == "sgd_momentum")
                cc.optimizer = CentralizedConfig::Optimizer::SgdMomentum;
            else if (opt == "adam")
                cc.optimizer = CentralizedConfig::Optimizer::Adam;
            else
                fail("trainer.centralized.optimizer", "unknown optimizer '" + opt + "'");
            cc.lr = get_num(c, "trainer.centralized", "lr", 0.1);
            cc.momentum = get_num(c, "trainer.centralized", "momentum", 0.9);
            cc.epsilon = get_num(c, "trainer.centralized", "epsilon", 1e-4);
            cc.epochs = get_count(c, "trainer.centralized", "epochs", 50);
            cc.batch_size = get_count(c, "trainer.centralized", "batch_size", 20);
            cc.eval_every = get_count(c, "trainer.centralized", "eval_every", 5);
            cc.rho_mode = parse_rho(c, "trainer.centralized");
            if (c.contains("percentiles")) cc.percentiles = c.at("percentiles").get<bool>();
            cc.seed = cfg.seed;
        }
    } else {
        cfg.fed_train.seed = cfg.seed;
        cfg.cen_train.seed = cfg.seed;
    }

    if (doc.contains("entropy")) {
        const json& e = doc.at("entropy");
        EntropyConfig ec;
        ec.label = get_count(e, "entropy", "label", 0);
        ec.train.steps = get_count(e, "entropy", "steps", 2000);
        ec.train.lr = get_num(e, "entropy", "lr", 1e-3);
        ec.train.batch_size = get_count(e, "entropy", "batch_size", 16);
        ec.iwae_samples = get_count(e, "entropy", "iwae_samples", 1000);
        ec.min_examples = get_count(e, "entropy", "min_examples", 8);
        if (e.contains("vae")) {
            const json& v = e.at("vae");
            ec.vae.latent_dim = get_count(v, "entropy.vae", "latent_dim", 2);
            ec.vae.encoder_hidden = get_count(v, "entropy.vae", "encoder_hidden", 16);
            ec.vae.decoder_hidden = get_count(v, "entropy.vae", "decoder_hidden", 16);
            if (ec.vae.latent_dim < 1) fail("entropy.vae.latent_dim", "must be >= 1");
        }
        cfg.entropy = ec;
    }

    if (doc.contains("outputs")) {
        const json& o = doc.at("outputs");
        auto opt_str = [&](const char* key) -> std::optional<std::string> {
            if (!o.contains(key)) return std::nullopt;
            return get_str(o, "outputs", key, "", true);
        };
        cfg.outputs.metrics_csv = opt_str("metrics_csv");
        cfg.outputs.dataset_out = opt_str("dataset_out");
        cfg.outputs.entropy_csv = opt_str("entropy_csv");
        cfg.outputs.model_out = opt_str("model_out");
        cfg.outputs.split_prefix = opt_str("split_prefix");
    }
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str());
}

void save_model(const ModelParams& params, const std::string& path) {
    json doc;
    doc["kind"] = params.spec.kind == ModelSpec::Kind::Linear ? "linear" : "mlp";
    doc["hidden_units"] = params.spec.hidden_units;
    doc["input_dim"] = params.spec.input_dim;
    doc["num_classes"] = params.spec.num_classes;
    doc["values"] = params.values;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << doc.dump() << '\n';
}

ModelParams load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    json doc;
    try {
        in >> doc;
        ModelParams p;
        std::string kind = doc.at("kind").get<std::string>();
        p.spec.kind = kind == "linear" ? ModelSpec::Kind::Linear : ModelSpec::Kind::Mlp;
        p.spec.hidden_units = doc.at("hidden_units").get<std::size_t>();
        p.spec.input_dim = doc.at("input_dim").get<std::size_t>();
        p.spec.num_classes = doc.at("num_classes").get<std::size_t>();
        p.values = doc.at("values").get<std::vector<double>>();
        if (p.values.size() != p.spec.param_count())
            throw Error(ErrorKind::ParseError, "model values length does not match spec");
        return p;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("model parse error: ") + e.what());
    }
}

}  // namespace fedgen
