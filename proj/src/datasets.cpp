#include "fedgen/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fedgen/numerics.hpp"

namespace fedgen {

using nlohmann::json;

std::size_t FederatedDataset::total_examples() const {
    std::size_t n = 0;
    for (const auto& [id, c] : clients) n += c.examples.size();
    return n;
}

static std::string client_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "client_%04zu", i);
    return buf;
}

FederatedDataset generate_synthetic(const SyntheticMetaConfig& cfg, std::uint64_t seed) {
    if (cfg.num_labels < 1 || cfg.feature_dim < 1 || cfg.num_clients < 1 || cfg.examples_per_client < 1 ||
        cfg.sigma_class < 0 || cfg.sigma_client < 0 || cfg.sigma_within < 0 || cfg.dirichlet_alpha <= 0)
        throw Error(ErrorKind::InvalidConfig, "generate_synthetic: invalid config");

    const std::size_t K = cfg.num_labels, d = cfg.feature_dim;
    SeededRng root(seed);

    // global class means, drawn once
    SeededRng class_rng = root.derive("class_means");
    std::vector<std::vector<double>> mu(K, std::vector<double>(d));
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < d; ++j) mu[k][j] = cfg.sigma_class * class_rng.next_normal();

    FederatedDataset fd;
    fd.num_labels = K;
    fd.feature_dim = d;

    for (std::size_t c = 0; c < cfg.num_clients; ++c) {
        SeededRng crng = root.derive("client", c);
        std::vector<std::vector<double>> shift(K, std::vector<double>(d));
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j < d; ++j) shift[k][j] = cfg.sigma_client * crng.next_normal();

        std::vector<double> alpha(K, cfg.dirichlet_alpha);
        std::vector<double> mix = crng.next_dirichlet(alpha);

        ClientDataset cd;
        cd.id = client_name(c);
        for (std::size_t e = 0; e < cfg.examples_per_client; ++e) {
            // draw label from the client mix
            double u = crng.next_double();
            std::size_t y = K - 1;
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                acc += mix[k];
                if (u < acc) { y = k; break; }
            }
            Example ex;
            ex.y = y;
            ex.x.resize(d);
            for (std::size_t j = 0; j < d; ++j)
                ex.x[j] = mu[y][j] + shift[y][j] + cfg.sigma_within * crng.next_normal();
            cd.examples.push_back(std::move(ex));
        }
        cd.weight = static_cast<double>(cd.examples.size());
        fd.clients.emplace(cd.id, std::move(cd));
    }

    // rescale features to [0,1] per dimension across the whole dataset
    std::vector<double> lo(d, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
    for (const auto& [id, cd] : fd.clients)
        for (const auto& ex : cd.examples)
            for (std::size_t j = 0; j < d; ++j) {
                lo[j] = std::min(lo[j], ex.x[j]);
                hi[j] = std::max(hi[j], ex.x[j]);
            }
    for (auto& [id, cd] : fd.clients)
        for (auto& ex : cd.examples)
            for (std::size_t j = 0; j < d; ++j) {
                double range = hi[j] - lo[j];
                ex.x[j] = range > 0 ? (ex.x[j] - lo[j]) / range : 0.5;
            }
    return fd;
}

std::vector<Example> merge_clients(const FederatedDataset& fd) {
    if (fd.clients.empty()) throw Error(ErrorKind::EmptyDataset, "merge_clients: empty dataset");
    std::vector<Example> pool;
    pool.reserve(fd.total_examples());
    for (const auto& [id, cd] : fd.clients)  // std::map iterates ids ascending
        pool.insert(pool.end(), cd.examples.begin(), cd.examples.end());
    return pool;
}

std::string federated_to_json(const FederatedDataset& fd) {
    json doc;
    doc["num_labels"] = fd.num_labels;
    doc["feature_dim"] = fd.feature_dim;
    doc["clients"] = json::array();
    for (const auto& [id, cd] : fd.clients) {
        json jc;
        jc["id"] = cd.id;
        jc["weight"] = cd.weight;
        jc["examples"] = json::array();
        for (const auto& ex : cd.examples) {
            json je;
            je["x"] = ex.x;
            je["y"] = ex.y;
            jc["examples"].push_back(std::move(je));
        }
        doc["clients"].push_back(std::move(jc));
    }
    return doc.dump();
}

static void reject_unknown(const json& obj, std::initializer_list<const char*> known, const char* where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) { ok = true; break; }
        if (!ok)
            throw Error(ErrorKind::ParseError, std::string("unknown field '") + it.key() + "' in " + where);
    }
}

FederatedDataset parse_federated_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("dataset parse error: ") + e.what());
    }
    try {
        reject_unknown(doc, {"num_labels", "feature_dim", "clients"}, "dataset");
        FederatedDataset fd;
        fd.num_labels = doc.at("num_labels").get<std::size_t>();
        fd.feature_dim = doc.at("feature_dim").get<std::size_t>();
        for (const auto& jc : doc.at("clients")) {
            reject_unknown(jc, {"id", "weight", "examples"}, "client");
            ClientDataset cd;
            cd.id = jc.at("id").get<std::string>();
            for (const auto& je : jc.at("examples")) {
                reject_unknown(je, {"x", "y"}, "example");
                Example ex;
                ex.x = je.at("x").get<std::vector<double>>();
                ex.y = je.at("y").get<std::size_t>();
                if (ex.y >= fd.num_labels)
                    throw Error(ErrorKind::ParseError, "example label out of range for client " + cd.id);
                if (ex.x.size() != fd.feature_dim)
                    throw Error(ErrorKind::ParseError, "example feature dim mismatch for client " + cd.id);
                for (double v : ex.x)
                    if (!std::isfinite(v))
                        throw Error(ErrorKind::ParseError, "non-finite feature for client " + cd.id);
                cd.examples.push_back(std::move(ex));
            }
            if (cd.examples.empty())
                throw Error(ErrorKind::ParseError, "client " + cd.id + " has no examples");
            cd.weight = jc.contains("weight") ? jc.at("weight").get<double>()
                                              : static_cast<double>(cd.examples.size());
            if (cd.weight < 0) throw Error(ErrorKind::ParseError, "negative weight for client " + cd.id);
            if (fd.clients.count(cd.id))
                throw Error(ErrorKind::ParseError, "duplicate client id " + cd.id);
            fd.clients.emplace(cd.id, std::move(cd));
        }
        return fd;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("dataset parse error: ") + e.what());
    }
}

FederatedDataset load_federated(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_federated_json(ss.str());
}

void save_federated(const FederatedDataset& fd, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << federated_to_json(fd) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
}

}  // namespace fedgen
