#include "fedgen/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <thread>

#include "fedgen/fedsim.hpp"
#include "fedgen/kernels.hpp"
#include "fedgen/numerics.hpp"

namespace fedgen {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Parameter block offsets within VaeParams::values.
struct Layout {
    std::size_t d, L, he, hd, T, oe, ein, din;
    std::size_t we, be, ue, ce, wd, bd, ud, cd, total;

    explicit Layout(const VaeSpec& s) {
        d = s.input_dim;
        L = s.latent_dim;
        he = s.encoder_hidden;
        hd = s.decoder_hidden;
        T = s.tril_count();
        oe = L + T;
        ein = he > 0 ? he : d;
        din = hd > 0 ? hd : L;
        std::size_t off = 0;
        we = off; off += he > 0 ? he * d : 0;
        be = off; off += he > 0 ? he : 0;
        ue = off; off += oe * ein;
        ce = off; off += oe;
        wd = off; off += hd > 0 ? hd * L : 0;
        bd = off; off += hd > 0 ? hd : 0;
        ud = off; off += d * din;
        cd = off; off += d;
        total = off;
    }
};

struct EncoderOut {
    std::vector<double> ein_vec;   // encoder hidden activations (or the input itself)
    std::vector<double> mu;        // L
    std::vector<double> traw;      // T raw lower-triangle entries
    std::vector<double> tril;      // T, diagonal passed through softplus
    double logdet = 0.0;           // sum of log diagonal entries
};

EncoderOut encode(const VaeParams& p, const Layout& lay, const std::vector<double>& x) {
    const double* v = p.values.data();
    EncoderOut e;
    if (lay.he > 0) {
        e.ein_vec.resize(lay.he);
        for (std::size_t j = 0; j < lay.he; ++j)
            e.ein_vec[j] = std::tanh(kern::dot(v + lay.we + j * lay.d, x.data(), lay.d) + v[lay.be + j]);
    } else {
        e.ein_vec = x;
    }
    e.mu.resize(lay.L);
    e.traw.resize(lay.T);
    for (std::size_t j = 0; j < lay.oe; ++j) {
        double o = kern::dot(v + lay.ue + j * lay.ein, e.ein_vec.data(), lay.ein) + v[lay.ce + j];
        if (j < lay.L)
            e.mu[j] = o;
        else
            e.traw[j - lay.L] = o;
    }
    e.tril = e.traw;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < lay.L; ++i)
        for (std::size_t j = 0; j <= i; ++j, ++idx)
            if (i == j) {
                e.tril[idx] = softplus(e.traw[idx]);
                e.logdet += std::log(e.tril[idx]);
            }
    return e;
}

// z = mu + L_tril * eps
std::vector<double> reparameterize(const Layout& lay, const EncoderOut& e, const std::vector<double>& eps) {
    std::vector<double> z = e.mu;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < lay.L; ++i)
        for (std::size_t j = 0; j <= i; ++j, ++idx) z[i] += e.tril[idx] * eps[j];
    return z;
}

struct DecoderOut {
    std::vector<double> din_vec;
    std::vector<double> out;  // logits (Bernoulli) or means (Gaussian)
};

DecoderOut decode(const VaeParams& p, const Layout& lay, const std::vector<double>& z) {
    const double* v = p.values.data();
    DecoderOut o;
    if (lay.hd > 0) {
        o.din_vec.resize(lay.hd);
        for (std::size_t j = 0; j < lay.hd; ++j)
            o.din_vec[j] = std::tanh(kern::dot(v + lay.wd + j * lay.L, z.data(), lay.L) + v[lay.bd + j]);
    } else {
        o.din_vec = z;
    }
    o.out.resize(lay.d);
    for (std::size_t j = 0; j < lay.d; ++j)
        o.out[j] = kern::dot(v + lay.ud + j * lay.din, o.din_vec.data(), lay.din) + v[lay.cd + j];
    return o;
}

double log_likelihood(const VaeSpec& spec, const std::vector<double>& out, const std::vector<double>& x) {
    double ll = 0.0;
    if (spec.likelihood == VaeSpec::Likelihood::Bernoulli) {
        for (std::size_t j = 0; j < x.size(); ++j) ll += x[j] * out[j] - softplus(out[j]);
    } else {
        for (std::size_t j = 0; j < x.size(); ++j) {
            double r = x[j] - out[j];
            ll += -0.5 * r * r;
        }
        ll -= 0.5 * static_cast<double>(x.size()) * kLog2Pi;
    }
    return ll;
}

void check_features(const VaeSpec& spec, const std::vector<double>& x) {
    if (x.size() != spec.input_dim)
        throw Error(ErrorKind::ShapeMismatch, "vae: feature dimension mismatch");
    if (spec.likelihood == VaeSpec::Likelihood::Bernoulli)
        for (double v : x)
            if (!(v >= 0.0 && v <= 1.0))
                throw Error(ErrorKind::OutOfRangeFeatures, "vae: Bernoulli features must lie in [0,1]");
}

}  // namespace

std::size_t VaeSpec::param_count() const { return Layout(*this).total; }

VaeParams vae_init(const VaeSpec& spec, std::uint64_t seed) {
    if (spec.input_dim < 1 || spec.latent_dim < 1)
        throw Error(ErrorKind::InvalidSpec, "vae_init: dimensions must be positive");
    Layout lay(spec);
    VaeParams p;
    p.spec = spec;
    p.values.assign(lay.total, 0.0);
    SeededRng rng = SeededRng(seed).derive("vae_init");
    auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in) {
        double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < count; ++i) p.values[off + i] = s * rng.next_normal();
    };
    if (lay.he > 0) fill(lay.we, lay.he * lay.d, lay.d);
    fill(lay.ue, lay.oe * lay.ein, lay.ein);
    if (lay.hd > 0) fill(lay.wd, lay.hd * lay.L, lay.L);
    fill(lay.ud, lay.d * lay.din, lay.din);
    return p;
}

std::pair<double, std::vector<double>> elbo_and_grad(const VaeParams& vae,
                                                     const std::vector<Example>& batch,
                                                     std::size_t mc_samples, std::uint64_t seed) {
    if (batch.empty()) throw Error(ErrorKind::EmptyInput, "elbo_and_grad: empty batch");
    if (mc_samples < 1) throw Error(ErrorKind::InvalidConfig, "elbo_and_grad: mc_samples must be >= 1");
    const Layout lay(vae.spec);
    const double* v = vae.values.data();
    std::vector<double> g(lay.total, 0.0);
    double elbo = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    const double sscale = 1.0 / static_cast<double>(mc_samples);
    SeededRng rng = SeededRng(seed).derive("elbo_noise");

    for (const auto& ex : batch) {
        check_features(vae.spec, ex.x);
        EncoderOut enc = encode(vae, lay, ex.x);

        // closed-form KL(q || N(0, I))
        double fro = kern::dot(enc.tril.data(), enc.tril.data(), lay.T);
        double kl = 0.5 * (fro + kern::dot(enc.mu.data(), enc.mu.data(), lay.L) -
                           static_cast<double>(lay.L)) -
                    enc.logdet;

        std::vector<double> dmu(lay.L, 0.0), dtril(lay.T, 0.0);
        double recon_mean = 0.0;

        for (std::size_t s = 0; s < mc_samples; ++s) {
            std::vector<double> eps(lay.L);
            for (double& e : eps) e = rng.next_normal();
            std::vector<double> z = reparameterize(lay, enc, eps);
            DecoderOut dec = decode(vae, lay, z);
            recon_mean += sscale * log_likelihood(vae.spec, dec.out, ex.x);

            // d(recon)/d(out), already carrying the batch and sample averaging
            std::vector<double> dout(lay.d);
            if (vae.spec.likelihood == VaeSpec::Likelihood::Bernoulli) {
                for (std::size_t j = 0; j < lay.d; ++j)
                    dout[j] = scale * sscale * (ex.x[j] - sigmoid(dec.out[j]));
            } else {
                for (std::size_t j = 0; j < lay.d; ++j)
                    dout[j] = scale * sscale * (ex.x[j] - dec.out[j]);
            }

            std::vector<double> gdin(lay.din, 0.0);
            for (std::size_t j = 0; j < lay.d; ++j) {
                kern::axpy(dout[j], dec.din_vec.data(), g.data() + lay.ud + j * lay.din, lay.din);
                g[lay.cd + j] += dout[j];
                kern::axpy(dout[j], v + lay.ud + j * lay.din, gdin.data(), lay.din);
            }
            std::vector<double> gz(lay.L, 0.0);
            if (lay.hd > 0) {
                for (std::size_t j = 0; j < lay.hd; ++j) {
                    double gpre = gdin[j] * (1.0 - dec.din_vec[j] * dec.din_vec[j]);
                    kern::axpy(gpre, z.data(), g.data() + lay.wd + j * lay.L, lay.L);
                    g[lay.bd + j] += gpre;
                    kern::axpy(gpre, v + lay.wd + j * lay.L, gz.data(), lay.L);
                }
            } else {
                gz = gdin;
            }
            // through z = mu + L eps (per-sample scaling already in gz)
            for (std::size_t i = 0; i < lay.L; ++i) dmu[i] += gz[i];
            std::size_t idx = 0;
            for (std::size_t i = 0; i < lay.L; ++i)
                for (std::size_t j = 0; j <= i; ++j, ++idx) dtril[idx] += gz[i] * eps[j];
        }

        elbo += scale * (recon_mean - kl);

        // KL gradient (ELBO subtracts it)
        for (std::size_t i = 0; i < lay.L; ++i) dmu[i] -= scale * enc.mu[i];
        {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < lay.L; ++i)
                for (std::size_t j = 0; j <= i; ++j, ++idx) {
                    if (i == j)
                        dtril[idx] -= scale * (enc.tril[idx] - 1.0 / enc.tril[idx]);
                    else
                        dtril[idx] -= scale * enc.tril[idx];
                }
        }

        // tril diagonal entries pass through softplus
        std::vector<double> dtraw = dtril;
        {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < lay.L; ++i)
                for (std::size_t j = 0; j <= i; ++j, ++idx)
                    if (i == j) dtraw[idx] = dtril[idx] * sigmoid(enc.traw[idx]);
        }

        // encoder backward
        std::vector<double> dout_e(lay.oe);
        std::copy(dmu.begin(), dmu.end(), dout_e.begin());
        std::copy(dtraw.begin(), dtraw.end(), dout_e.begin() + lay.L);
        std::vector<double> gein(lay.ein, 0.0);
        for (std::size_t j = 0; j < lay.oe; ++j) {
            kern::axpy(dout_e[j], enc.ein_vec.data(), g.data() + lay.ue + j * lay.ein, lay.ein);
            g[lay.ce + j] += dout_e[j];
            kern::axpy(dout_e[j], v + lay.ue + j * lay.ein, gein.data(), lay.ein);
        }
        if (lay.he > 0) {
            for (std::size_t j = 0; j < lay.he; ++j) {
                double gpre = gein[j] * (1.0 - enc.ein_vec[j] * enc.ein_vec[j]);
                kern::axpy(gpre, ex.x.data(), g.data() + lay.we + j * lay.d, lay.d);
                g[lay.be + j] += gpre;
            }
        }
    }
    return {elbo, std::move(g)};
}

VaeParams train_vae(const std::vector<Example>& examples, const VaeSpec& spec,
                    const VaeTrainConfig& cfg, std::uint64_t seed) {
    if (examples.empty()) throw Error(ErrorKind::EmptyInput, "train_vae: empty example set");
    for (const auto& ex : examples)
        if (ex.y != examples.front().y)
            throw Error(ErrorKind::InvalidConfig, "train_vae: examples must share a single label");

    VaeParams p = vae_init(spec, SeededRng(seed).derive("init").next_u64());
    SeededRng root(seed);
    const std::size_t n = examples.size();

    std::vector<double> m(p.values.size(), 0.0), v2(p.values.size(), 0.0);
    std::vector<Example> batch;

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        SeededRng srng = root.derive("step", step);
        std::size_t b = std::min(cfg.batch_size, n);
        auto idx = srng.sample_without_replacement(n, b);
        batch.clear();
        for (std::size_t i : idx) batch.push_back(examples[i]);

        auto [elbo, g] = elbo_and_grad(p, batch, cfg.mc_samples, srng.derive("noise").next_u64());
        (void)elbo;
        // Adam ascent on the ELBO
        double t = static_cast<double>(step + 1);
        double bc1 = 1.0 - std::pow(0.9, t), bc2 = 1.0 - std::pow(0.999, t);
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v2[i] = 0.999 * v2[i] + 0.001 * g[i] * g[i];
            p.values[i] += cfg.lr * (m[i] / bc1) / (std::sqrt(v2[i] / bc2) + 1e-8);
        }
    }
    return p;
}

double iwae_log_evidence(const VaeParams& vae, const std::vector<double>& x, std::size_t k,
                         std::uint64_t seed) {
    if (k < 1) throw Error(ErrorKind::InvalidConfig, "iwae_log_evidence: K must be >= 1");
    check_features(vae.spec, x);
    const Layout lay(vae.spec);
    EncoderOut enc = encode(vae, lay, x);
    SeededRng rng = SeededRng(seed).derive("iwae_noise");

    std::vector<double> logw(k);
    std::vector<double> eps(lay.L);
    for (std::size_t s = 0; s < k; ++s) {
        for (double& e : eps) e = rng.next_normal();
        std::vector<double> z = reparameterize(lay, enc, eps);
        DecoderOut dec = decode(vae, lay, z);
        double recon = log_likelihood(vae.spec, dec.out, x);
        double log_prior = -0.5 * kern::dot(z.data(), z.data(), lay.L) -
                           0.5 * static_cast<double>(lay.L) * kLog2Pi;
        double log_q = -0.5 * kern::dot(eps.data(), eps.data(), lay.L) - enc.logdet -
                       0.5 * static_cast<double>(lay.L) * kLog2Pi;
        logw[s] = recon + log_prior - log_q;
    }
    return log_sum_exp(logw) - std::log(static_cast<double>(k));
}

ClientEntropy client_entropy(const FederatedDataset& fd, std::size_t label, const VaeSpec& spec,
                             const VaeTrainConfig& cfg, std::size_t iwae_samples, std::uint64_t seed,
                             std::size_t min_examples) {
    struct Job {
        std::string id;
        std::vector<Example> examples;
    };
    std::vector<Job> jobs;
    for (const auto& [id, cd] : fd.clients) {
        std::vector<Example> filt;
        for (const auto& ex : cd.examples)
            if (ex.y == label) filt.push_back(ex);
        if (filt.size() < min_examples) {
            std::cerr << "warning: client " << id << " has " << filt.size() << " examples of label "
                      << label << " (< " << min_examples << "); skipped\n";
            continue;
        }
        jobs.push_back({id, std::move(filt)});
    }
    if (jobs.empty())
        throw Error(ErrorKind::NoQualifyingClients, "client_entropy: no client meets min_examples");

    std::vector<double> results(jobs.size());
    SeededRng root(seed);
    auto run_job = [&](std::size_t j) {
        SeededRng crng = root.derive("entropy").derive(jobs[j].id);
        VaeParams vae = train_vae(jobs[j].examples, spec, cfg, crng.derive("train").next_u64());
        double total = 0.0;
        for (std::size_t e = 0; e < jobs[j].examples.size(); ++e)
            total += iwae_log_evidence(vae, jobs[j].examples[e].x, iwae_samples,
                                       crng.derive("iwae", e).next_u64());
        results[j] = -total / static_cast<double>(jobs[j].examples.size());
    };

    std::size_t workers = std::min(worker_thread_count(), jobs.size());
    if (workers <= 1) {
        for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w)
            threads.emplace_back([&, w] {
                for (std::size_t j = w; j < jobs.size(); j += workers) run_job(j);
            });
        for (auto& t : threads) t.join();
    }

    ClientEntropy out;
    double total = 0.0;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        out.per_client[jobs[j].id] = results[j];
        out.n_examples[jobs[j].id] = jobs[j].examples.size();
        total += results[j];
    }
    out.mean = total / static_cast<double>(jobs.size());
    return out;
}

std::string entropy_csv_string(const ClientEntropy& e, std::size_t label) {
    std::string s = "client_id,label,n_examples,entropy_nats\n";
    char buf[64];
    for (const auto& [id, val] : e.per_client) {
        s += id + ',' + std::to_string(label) + ',' + std::to_string(e.n_examples.at(id)) + ',';
        std::snprintf(buf, sizeof(buf), "%.6f", val);
        s += buf;
        s += '\n';
    }
    return s;
}

void write_entropy_csv(const ClientEntropy& e, std::size_t label, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << entropy_csv_string(e, label);
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
}

}  // namespace fedgen
