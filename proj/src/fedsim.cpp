#include "fedgen/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <thread>

#include "fedgen/kernels.hpp"
#include "fedgen/numerics.hpp"

namespace fedgen {

std::size_t worker_thread_count() {
    const char* env = std::getenv("FEDGEN_THREADS");
    if (env) {
        long v = std::atol(env);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Run fn(i) for i in [0, n) across up to worker_thread_count() threads.
// Results ordering is the caller's concern; fn must be pure per index.
static void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = std::min(worker_thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : threads) t.join();
}

std::vector<std::string> sample_clients(const std::vector<std::string>& ids, std::size_t m,
                                        std::size_t round, std::uint64_t seed) {
    if (m < 1 || m > ids.size())
        throw Error(ErrorKind::TooMany, "sample_clients: need 1 <= m <= number of clients");
    SeededRng rng = SeededRng(seed).derive("sample", round);
    auto idx = rng.sample_without_replacement(ids.size(), m);
    std::vector<std::string> out;
    out.reserve(m);
    for (std::size_t i : idx) out.push_back(ids[i]);
    std::sort(out.begin(), out.end());
    return out;
}

std::pair<std::vector<double>, std::size_t> client_update(const ModelParams& params,
                                                          const std::vector<Example>& train,
                                                          const ClientOptConfig& cfg, SeededRng rng) {
    if (train.empty()) throw Error(ErrorKind::EmptyClient, "client_update: empty train set");
    ModelParams local = params;
    const std::size_t n = train.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Example> batch;

    for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t end = std::min(n, start + cfg.batch_size);
            batch.assign(end - start, Example{});
            for (std::size_t i = start; i < end; ++i) batch[i - start] = train[order[i]];
            auto g = grad(local, batch);
            kern::axpy(-cfg.client_lr, g.data(), local.values.data(), g.size());
        }
    }
    std::vector<double> delta(local.values.size());
    kern::sub(local.values.data(), params.values.data(), delta.data(), delta.size());
    return {std::move(delta), n};
}

std::vector<double> aggregate_deltas(const std::vector<std::pair<std::vector<double>, double>>& pairs) {
    if (pairs.empty()) throw Error(ErrorKind::EmptyRound, "aggregate_deltas: no client deltas");
    double wsum = 0.0;
    for (const auto& [delta, w] : pairs) {
        if (w < 0) throw Error(ErrorKind::ZeroWeight, "aggregate_deltas: negative weight");
        if (delta.size() != pairs.front().first.size())
            throw Error(ErrorKind::ShapeMismatch, "aggregate_deltas: delta length mismatch");
        wsum += w;
    }
    if (wsum <= 0.0) throw Error(ErrorKind::ZeroWeight, "aggregate_deltas: weights sum to zero");
    std::vector<double> mean(pairs.front().first.size(), 0.0);
    for (const auto& [delta, w] : pairs) kern::axpy(w / wsum, delta.data(), mean.data(), mean.size());
    return mean;
}

static double decayed_lr(const ServerOptConfig& cfg, std::size_t round) {
    double lr = cfg.server_lr;
    if (cfg.decay.every_rounds > 0)
        lr *= std::pow(cfg.decay.factor, static_cast<double>(round / cfg.decay.every_rounds));
    return lr;
}

void server_step_fedavgm(ServerState& state, const std::vector<double>& mean_delta,
                         const ServerOptConfig& cfg) {
    auto& p = state.params.values;
    if (mean_delta.size() != p.size() || state.m.size() != p.size())
        throw Error(ErrorKind::ShapeMismatch, "server_step_fedavgm: shape mismatch");
    double lr = decayed_lr(cfg, state.round);
    for (std::size_t i = 0; i < p.size(); ++i) {
        state.m[i] = cfg.momentum * state.m[i] + mean_delta[i];
        p[i] += lr * state.m[i];
    }
    ++state.round;
}

void server_step_fedadam(ServerState& state, const std::vector<double>& mean_delta,
                         const ServerOptConfig& cfg) {
    auto& p = state.params.values;
    if (mean_delta.size() != p.size() || state.m.size() != p.size() || state.v.size() != p.size())
        throw Error(ErrorKind::ShapeMismatch, "server_step_fedadam: shape mismatch");
    double lr = decayed_lr(cfg, state.round);
    for (std::size_t i = 0; i < p.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * mean_delta[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * mean_delta[i] * mean_delta[i];
        p[i] += lr * state.m[i] / (std::sqrt(state.v[i]) + cfg.epsilon);  // no bias correction
    }
    ++state.round;
}

MetricsLog run_federated(const ThreeWaySplit& split, const ModelSpec& spec, const TrainConfig& cfg) {
    return run_federated(split, spec, cfg, nullptr);
}

MetricsLog run_federated(const ThreeWaySplit& split, const ModelSpec& spec, const TrainConfig& cfg,
                         ModelParams* final_params) {
    std::vector<std::string> ids;
    for (const auto& [id, ex] : split.part_train)
        if (!ex.empty()) ids.push_back(id);
    if (ids.empty())
        throw Error(ErrorKind::EmptyDataset, "run_federated: no participating client has train data");

    ServerState state;
    state.params = init_params(spec, SeededRng(cfg.seed).derive("init").next_u64());
    state.m.assign(state.params.values.size(), 0.0);
    state.v.assign(state.params.values.size(), 0.0);

    SeededRng root(cfg.seed);
    MetricsLog log;
    const std::size_t m_clients = std::min(cfg.clients_per_round, ids.size());

    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        auto selected = sample_clients(ids, m_clients, t, cfg.seed);

        std::vector<std::pair<std::vector<double>, double>> results(selected.size());
        parallel_for(selected.size(), [&](std::size_t i) {
            const std::string& id = selected[i];
            SeededRng crng = root.derive("round", t).derive(id);
            auto [delta, count] = client_update(state.params, split.part_train.at(id), cfg.client, crng);
            double w = cfg.rho_mode == RhoMode::Uniform ? 1.0 : static_cast<double>(count);
            results[i] = {std::move(delta), w};
        });

        auto mean_delta = aggregate_deltas(results);
        if (cfg.server.kind == ServerOptConfig::Kind::FedAvgM)
            server_step_fedavgm(state, mean_delta, cfg.server);
        else
            server_step_fedadam(state, mean_delta, cfg.server);

        bool last = t + 1 == cfg.rounds;
        if ((cfg.eval_every > 0 && (t + 1) % cfg.eval_every == 0) || last)
            if (log.records.empty() || log.records.back().index != t + 1)
                log.records.push_back(
                    make_record(t + 1, state.params, split, cfg.rho_mode, cfg.percentiles));
    }
    if (final_params) *final_params = state.params;
    return log;
}

MetricsLog run_centralized(const ThreeWaySplit& split, const ModelSpec& spec,
                           const CentralizedConfig& cfg) {
    return run_centralized(split, spec, cfg, nullptr);
}

MetricsLog run_centralized(const ThreeWaySplit& split, const ModelSpec& spec,
                           const CentralizedConfig& cfg, ModelParams* final_params) {
    std::vector<Example> pool;
    for (const auto& [id, ex] : split.part_train) pool.insert(pool.end(), ex.begin(), ex.end());
    if (pool.empty())
        throw Error(ErrorKind::EmptyDataset, "run_centralized: no participating train data");

    ModelParams params = init_params(spec, SeededRng(cfg.seed).derive("init").next_u64());
    std::vector<double> m(params.values.size(), 0.0), v(params.values.size(), 0.0);
    std::size_t adam_step = 0;

    SeededRng root(cfg.seed);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Example> batch;
    MetricsLog log;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        SeededRng erng = root.derive("epoch", epoch);
        erng.shuffle(order);
        for (std::size_t start = 0; start < pool.size(); start += cfg.batch_size) {
            std::size_t end = std::min(pool.size(), start + cfg.batch_size);
            batch.assign(end - start, Example{});
            for (std::size_t i = start; i < end; ++i) batch[i - start] = pool[order[i]];
            auto g = grad(params, batch);
            if (cfg.optimizer == CentralizedConfig::Optimizer::SgdMomentum) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    m[i] = cfg.momentum * m[i] + g[i];
                    params.values[i] -= cfg.lr * m[i];
                }
            } else {
                ++adam_step;
                double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_step));
                double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_step));
                for (std::size_t i = 0; i < g.size(); ++i) {
                    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                    params.values[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
                }
            }
        }
        bool last = epoch + 1 == cfg.epochs;
        if ((cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) || last)
            if (log.records.empty() || log.records.back().index != epoch + 1)
                log.records.push_back(
                    make_record(epoch + 1, params, split, cfg.rho_mode, cfg.percentiles));
    }
    if (final_params) *final_params = params;
    return log;
}

}  // namespace fedgen
