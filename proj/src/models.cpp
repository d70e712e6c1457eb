#include "fedgen/models.hpp"

#include <algorithm>
#include <cmath>

#include "fedgen/kernels.hpp"
#include "fedgen/numerics.hpp"

namespace fedgen {

std::size_t ModelSpec::param_count() const {
    if (kind == Kind::Linear) return num_classes * (input_dim + 1);
    return hidden_units * (input_dim + 1) + num_classes * (hidden_units + 1);
}

// Layouts:
//   linear: W (K x d) row-major, then b (K)
//   mlp:    W1 (h x d), b1 (h), W2 (K x h), b2 (K)

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
    if (spec.input_dim < 1 || spec.num_classes < 1 ||
        (spec.kind == ModelSpec::Kind::Mlp && spec.hidden_units < 1))
        throw Error(ErrorKind::InvalidSpec, "init_params: invalid model spec");

    ModelParams p;
    p.spec = spec;
    p.values.assign(spec.param_count(), 0.0);
    SeededRng rng = SeededRng(seed).derive("model_init");

    const std::size_t d = spec.input_dim, K = spec.num_classes, h = spec.hidden_units;
    if (spec.kind == ModelSpec::Kind::Linear) {
        double s = 1.0 / std::sqrt(static_cast<double>(d));
        for (std::size_t i = 0; i < K * d; ++i) p.values[i] = s * rng.next_normal();
    } else {
        double s1 = 1.0 / std::sqrt(static_cast<double>(d));
        for (std::size_t i = 0; i < h * d; ++i) p.values[i] = s1 * rng.next_normal();
        double s2 = 1.0 / std::sqrt(static_cast<double>(h));
        for (std::size_t i = 0; i < K * h; ++i) p.values[h * (d + 1) + i] = s2 * rng.next_normal();
    }
    return p;
}

namespace {

struct Forward {
    std::vector<double> hidden;  // mlp pre-activation applied (tanh outputs)
    std::vector<double> logits;
};

Forward forward(const ModelParams& p, std::span<const double> x) {
    const auto& s = p.spec;
    if (x.size() != s.input_dim) throw Error(ErrorKind::ShapeMismatch, "model: feature dim mismatch");
    const std::size_t d = s.input_dim, K = s.num_classes, h = s.hidden_units;
    const double* v = p.values.data();
    Forward f;
    f.logits.resize(K);
    if (s.kind == ModelSpec::Kind::Linear) {
        const double* b = v + K * d;
        for (std::size_t k = 0; k < K; ++k) f.logits[k] = kern::dot(v + k * d, x.data(), d) + b[k];
    } else {
        const double* w1 = v;
        const double* b1 = v + h * d;
        const double* w2 = v + h * (d + 1);
        const double* b2 = w2 + K * h;
        f.hidden.resize(h);
        for (std::size_t j = 0; j < h; ++j)
            f.hidden[j] = std::tanh(kern::dot(w1 + j * d, x.data(), d) + b1[j]);
        for (std::size_t k = 0; k < K; ++k)
            f.logits[k] = kern::dot(w2 + k * h, f.hidden.data(), h) + b2[k];
    }
    return f;
}

// log softmax in place; returns the log normalizer input vector untouched
void softmax_from_logits(std::vector<double>& logits, std::vector<double>& probs) {
    double m = *std::max_element(logits.begin(), logits.end());
    probs.resize(logits.size());
    double z = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        probs[k] = std::exp(logits[k] - m);
        z += probs[k];
    }
    for (double& q : probs) q /= z;
}

}  // namespace

double loss(const ModelParams& params, std::span<const Example> batch) {
    if (batch.empty()) throw Error(ErrorKind::EmptyInput, "loss: empty batch");
    double total = 0.0;
    for (const auto& ex : batch) {
        if (ex.y >= params.spec.num_classes)
            throw Error(ErrorKind::ShapeMismatch, "loss: label out of range");
        Forward f = forward(params, ex.x);
        double m = *std::max_element(f.logits.begin(), f.logits.end());
        double z = 0.0;
        for (double l : f.logits) z += std::exp(l - m);
        total += m + std::log(z) - f.logits[ex.y];  // -log softmax[y]
    }
    return total / static_cast<double>(batch.size());
}

std::vector<double> grad(const ModelParams& params, std::span<const Example> batch) {
    if (batch.empty()) throw Error(ErrorKind::EmptyInput, "grad: empty batch");
    const auto& s = params.spec;
    const std::size_t d = s.input_dim, K = s.num_classes, h = s.hidden_units;
    std::vector<double> g(params.values.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::vector<double> probs;

    for (const auto& ex : batch) {
        if (ex.y >= K) throw Error(ErrorKind::ShapeMismatch, "grad: label out of range");
        Forward f = forward(params, ex.x);
        softmax_from_logits(f.logits, probs);
        probs[ex.y] -= 1.0;  // dloss/dlogits (per example)

        if (s.kind == ModelSpec::Kind::Linear) {
            double* gw = g.data();
            double* gb = g.data() + K * d;
            for (std::size_t k = 0; k < K; ++k) {
                kern::axpy(inv_n * probs[k], ex.x.data(), gw + k * d, d);
                gb[k] += inv_n * probs[k];
            }
        } else {
            const double* w2 = params.values.data() + h * (d + 1);
            double* gw1 = g.data();
            double* gb1 = g.data() + h * d;
            double* gw2 = g.data() + h * (d + 1);
            double* gb2 = gw2 + K * h;

            std::vector<double> ghidden(h, 0.0);
            for (std::size_t k = 0; k < K; ++k) {
                kern::axpy(inv_n * probs[k], f.hidden.data(), gw2 + k * h, h);
                gb2[k] += inv_n * probs[k];
                kern::axpy(probs[k], w2 + k * h, ghidden.data(), h);
            }
            for (std::size_t j = 0; j < h; ++j) {
                double gpre = inv_n * ghidden[j] * (1.0 - f.hidden[j] * f.hidden[j]);
                kern::axpy(gpre, ex.x.data(), gw1 + j * d, d);
                gb1[j] += gpre;
            }
        }
    }
    return g;
}

std::size_t predict(const ModelParams& params, std::span<const double> x) {
    Forward f = forward(params, x);
    std::size_t best = 0;
    for (std::size_t k = 1; k < f.logits.size(); ++k)
        if (f.logits[k] > f.logits[best]) best = k;
    return best;
}

std::vector<double> finite_diff_grad(const ModelParams& params, std::span<const Example> batch, double h) {
    ModelParams p = params;
    std::vector<double> g(p.values.size());
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        double orig = p.values[i];
        p.values[i] = orig + h;
        double fp = loss(p, batch);
        p.values[i] = orig - h;
        double fm = loss(p, batch);
        p.values[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace fedgen
