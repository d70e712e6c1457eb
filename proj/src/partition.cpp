#include "fedgen/partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>

#include "fedgen/kernels.hpp"

namespace fedgen {

static std::string client_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "client_%04zu", i);
    return buf;
}

FederatedDataset dirichlet_label_partition(const std::vector<Example>& pool, std::size_t num_labels,
                                           std::size_t num_clients, double alpha, std::uint64_t seed) {
    if (pool.empty()) throw Error(ErrorKind::EmptyPool, "dirichlet_label_partition: empty pool");
    if (alpha <= 0.0) throw Error(ErrorKind::InvalidAlpha, "dirichlet_label_partition: alpha must be > 0");
    if (num_clients < 1) throw Error(ErrorKind::InvalidConfig, "dirichlet_label_partition: need >= 1 client");

    const std::size_t K = num_labels;
    std::vector<double> prior(K, 0.0);
    std::vector<std::vector<std::size_t>> stock(K);  // remaining pool indices per label
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].y >= K)
            throw Error(ErrorKind::InvalidConfig, "dirichlet_label_partition: label out of range");
        prior[pool[i].y] += 1.0;
        stock[pool[i].y].push_back(i);
    }
    for (double& p : prior) p /= static_cast<double>(pool.size());

    SeededRng root = SeededRng(seed).derive("dirichlet_partition");

    FederatedDataset fd;
    fd.num_labels = K;
    fd.feature_dim = pool.front().x.size();

    const std::size_t n = pool.size();
    const std::size_t base = n / num_clients, extra = n % num_clients;

    for (std::size_t c = 0; c < num_clients; ++c) {
        SeededRng rng = root.derive("client", c);
        // concentration alpha * prior (labels absent from the pool get zero mix)
        std::vector<double> conc;
        std::vector<std::size_t> conc_label;
        for (std::size_t k = 0; k < K; ++k)
            if (prior[k] > 0.0) {
                conc.push_back(alpha * prior[k]);
                conc_label.push_back(k);
            }
        std::vector<double> qc_present = rng.next_dirichlet(conc);
        std::vector<double> qc(K, 0.0);
        for (std::size_t i = 0; i < conc_label.size(); ++i) qc[conc_label[i]] = qc_present[i];

        ClientDataset cd;
        cd.id = client_name(c);
        const std::size_t quota = base + (c < extra ? 1 : 0);
        for (std::size_t e = 0; e < quota; ++e) {
            // draw a label from q_c restricted to labels with remaining stock
            double mass = 0.0;
            for (std::size_t k = 0; k < K; ++k)
                if (!stock[k].empty()) mass += qc[k];
            std::size_t chosen = K;
            if (mass > 0.0) {
                double u = rng.next_double() * mass, acc = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    if (stock[k].empty()) continue;
                    acc += qc[k];
                    if (u < acc) { chosen = k; break; }
                }
            }
            if (chosen == K) {  // q_c has no mass left on stocked labels; fall back to uniform
                std::vector<std::size_t> stocked;
                for (std::size_t k = 0; k < K; ++k)
                    if (!stock[k].empty()) stocked.push_back(k);
                chosen = stocked[rng.next_below(stocked.size())];
            }
            auto& s = stock[chosen];
            std::size_t pick = rng.next_below(s.size());
            cd.examples.push_back(pool[s[pick]]);
            s[pick] = s.back();
            s.pop_back();
        }
        cd.weight = static_cast<double>(cd.examples.size());
        fd.clients.emplace(cd.id, std::move(cd));
    }
    return fd;
}

Matrix embed_examples(const std::vector<Example>& pool, const EmbedderConfig& cfg) {
    if (pool.empty()) throw Error(ErrorKind::EmptyPool, "embed_examples: empty pool");
    const std::size_t n = pool.size(), d = pool.front().x.size();
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(pool[i].x.begin(), pool[i].x.end(), x.row(i).begin());

    switch (cfg.kind) {
        case EmbedderConfig::Kind::Raw:
            return x;
        case EmbedderConfig::Kind::Pca: {
            std::size_t k = std::min(cfg.k, std::min(n, d));
            PcaModel model = pca_fit(x, k);
            return pca_transform(model, x);
        }
        case EmbedderConfig::Kind::RandomProjection: {
            if (cfg.k < 1) throw Error(ErrorKind::InvalidConfig, "embed_examples: k must be >= 1");
            SeededRng rng = SeededRng(cfg.seed).derive("random_projection");
            Matrix r(cfg.k, d);
            double s = 1.0 / std::sqrt(static_cast<double>(cfg.k));
            for (double& v : r.data) v = s * rng.next_normal();
            Matrix out(n, cfg.k);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < cfg.k; ++j)
                    out.at(i, j) = kern::dot(x.row(i).data(), r.row(j).data(), d);
            return out;
        }
    }
    throw Error(ErrorKind::UnknownEmbedder, "embed_examples: unknown embedder kind");
}

// ---------------------------------------------------------------------------
// GMM

namespace {

thread_local std::vector<double> g_gmm_trace;

double gaussian_logpdf(const Gaussian& g, const Matrix& chol_l, std::span<const double> x) {
    const std::size_t d = g.mean.size();
    std::vector<double> diff(d), u(d);
    kern::sub(x.data(), g.mean.data(), diff.data(), d);
    // forward solve L u = diff
    for (std::size_t i = 0; i < d; ++i)
        u[i] = (diff[i] - kern::dot(chol_l.row(i).data(), u.data(), i)) / chol_l.at(i, i);
    double logdet = 0.0;
    for (std::size_t i = 0; i < d; ++i) logdet += std::log(chol_l.at(i, i));
    return -0.5 * static_cast<double>(d) * std::log(2.0 * M_PI) - logdet -
           0.5 * kern::dot(u.data(), u.data(), d);
}

std::vector<std::size_t> kmeanspp_seed(const Matrix& points, std::size_t c, SeededRng& rng) {
    const std::size_t n = points.rows, d = points.cols;
    std::vector<std::size_t> centers;
    centers.push_back(rng.next_below(n));
    std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
    std::vector<double> diff(d);
    while (centers.size() < c) {
        const double* last = points.row(centers.back()).data();
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            kern::sub(points.row(i).data(), last, diff.data(), d);
            dist2[i] = std::min(dist2[i], kern::dot(diff.data(), diff.data(), d));
            total += dist2[i];
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.next_below(n);
        } else {
            double u = rng.next_double() * total, acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist2[i];
                if (u < acc) { pick = i; break; }
            }
        }
        centers.push_back(pick);
    }
    return centers;
}

}  // namespace

const std::vector<double>& gmm_last_loglik_trace() { return g_gmm_trace; }

GaussianMixture gmm_fit(const Matrix& points, std::size_t num_components, std::size_t max_iters,
                        double tol, double reg, std::uint64_t seed) {
    const std::size_t n = points.rows, d = points.cols, c = num_components;
    if (c < 1 || n < c) throw Error(ErrorKind::TooFewPoints, "gmm_fit: need n >= C >= 1");

    // global mean / diagonal variance for covariance initialization
    std::vector<double> gmean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) kern::axpy(1.0, points.row(i).data(), gmean.data(), d);
    for (double& v : gmean) v /= static_cast<double>(n);
    std::vector<double> gvar(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double t = points.at(i, j) - gmean[j];
            gvar[j] += t * t;
        }
    for (double& v : gvar) v /= static_cast<double>(n);

    SeededRng rng = SeededRng(seed).derive("gmm_fit");
    auto centers = kmeanspp_seed(points, c, rng);

    GaussianMixture gmm;
    for (std::size_t k = 0; k < c; ++k) {
        Gaussian g;
        g.mean.assign(points.row(centers[k]).begin(), points.row(centers[k]).end());
        g.cov = Matrix(d, d);
        for (std::size_t j = 0; j < d; ++j) g.cov.at(j, j) = gvar[j] + reg;
        gmm.components.emplace_back(1.0 / static_cast<double>(c), std::move(g));
    }

    g_gmm_trace.clear();
    Matrix resp(n, c);
    std::vector<Matrix> chols(c);
    std::vector<double> logp(c);
    double prev_ll = -std::numeric_limits<double>::infinity();
    GaussianMixture last_good = gmm;

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        // A component can collapse onto a few near-duplicate points, driving its
        // covariance toward singular; past that point the likelihood is unbounded
        // and further iterations are numeric noise. Stop at the last
        // well-conditioned iterate instead.
        bool degenerate = false;
        for (std::size_t k = 0; k < c && !degenerate; ++k) {
            const Matrix& cov = gmm.components[k].second.cov;
            double max_diag = 0.0;
            for (std::size_t j = 0; j < d; ++j) max_diag = std::max(max_diag, cov.at(j, j));
            try {
                chols[k] = cholesky(cov);
            } catch (const Error&) {
                degenerate = true;
                break;
            }
            for (std::size_t j = 0; j < d; ++j)
                if (chols[k].at(j, j) * chols[k].at(j, j) < 1e-9 * max_diag) degenerate = true;
        }
        if (degenerate) {
            if (iter == 0) throw Error(ErrorKind::DegenerateData, "gmm_fit: singular covariance");
            return last_good;
        }
        last_good = gmm;
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < c; ++k)
                logp[k] = std::log(std::max(gmm.components[k].first, 1e-300)) +
                          gaussian_logpdf(gmm.components[k].second, chols[k], points.row(i));
            double lse = log_sum_exp(logp);
            ll += lse;
            for (std::size_t k = 0; k < c; ++k) resp.at(i, k) = std::exp(logp[k] - lse);
        }
        g_gmm_trace.push_back(ll);
        if (iter > 0 && ll - prev_ll < tol) break;
        prev_ll = ll;

        // M-step
        for (std::size_t k = 0; k < c; ++k) {
            double nk = 0.0;
            for (std::size_t i = 0; i < n; ++i) nk += resp.at(i, k);
            auto& [w, g] = gmm.components[k];
            w = nk / static_cast<double>(n);
            if (nk < 1e-12) continue;  // no mass; keep mean and covariance
            std::fill(g.mean.begin(), g.mean.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                kern::axpy(resp.at(i, k) / nk, points.row(i).data(), g.mean.data(), d);
            std::fill(g.cov.data.begin(), g.cov.data.end(), 0.0);
            std::vector<double> diff(d);
            for (std::size_t i = 0; i < n; ++i) {
                kern::sub(points.row(i).data(), g.mean.data(), diff.data(), d);
                double r = resp.at(i, k) / nk;
                for (std::size_t a = 0; a < d; ++a)
                    kern::axpy(r * diff[a], diff.data(), g.cov.row(a).data(), d);
            }
            for (std::size_t a = 0; a < d; ++a) g.cov.at(a, a) += reg;
        }
    }
    return gmm;
}

std::vector<std::size_t> gmm_assign(const GaussianMixture& gmm, const Matrix& points) {
    const std::size_t c = gmm.components.size();
    if (points.rows == 0) return {};
    if (points.cols != gmm.components.front().second.mean.size())
        throw Error(ErrorKind::ShapeMismatch, "gmm_assign: dimension mismatch");

    std::vector<Matrix> chols(c);
    for (std::size_t k = 0; k < c; ++k) chols[k] = cholesky(gmm.components[k].second.cov);

    std::vector<std::size_t> out(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i) {
        std::size_t best = 0;
        double best_lp = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < c; ++k) {
            double lp = std::log(std::max(gmm.components[k].first, 1e-300)) +
                        gaussian_logpdf(gmm.components[k].second, chols[k], points.row(i));
            if (lp > best_lp) {  // ties stay on the lowest index
                best_lp = lp;
                best = k;
            }
        }
        out[i] = best;
    }
    return out;
}

double gaussian_kl(const Gaussian& p, const Gaussian& q) {
    const std::size_t d = p.mean.size();
    if (q.mean.size() != d || p.cov.rows != d || q.cov.rows != d)
        throw Error(ErrorKind::ShapeMismatch, "gaussian_kl: dimension mismatch");

    Matrix lq = cholesky(q.cov);
    Matrix lp = cholesky(p.cov);

    // inv(Lq) by forward substitution on the identity
    Matrix linv(d, d);
    for (std::size_t col = 0; col < d; ++col)
        for (std::size_t i = col; i < d; ++i) {
            double s = (i == col ? 1.0 : 0.0);
            for (std::size_t j = col; j < i; ++j) s -= lq.at(i, j) * linv.at(j, col);
            linv.at(i, col) = s / lq.at(i, i);
        }
    // tr(Sq^-1 Sp) = || Lq^-1 Lp ||_F^2 since Sp = Lp Lp^T
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t k = j; k <= i && k < d; ++k) s += linv.at(i, k) * lp.at(k, j);
            trace += s * s;
        }
    // quadratic term via u = Lq^-1 (mu_q - mu_p)
    std::vector<double> diff(d), u(d);
    kern::sub(q.mean.data(), p.mean.data(), diff.data(), d);
    for (std::size_t i = 0; i < d; ++i)
        u[i] = (diff[i] - kern::dot(lq.row(i).data(), u.data(), i)) / lq.at(i, i);

    double logdet_q = 0.0, logdet_p = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        logdet_q += std::log(lq.at(i, i));
        logdet_p += std::log(lp.at(i, i));
    }
    return 0.5 * (trace + kern::dot(u.data(), u.data(), d) - static_cast<double>(d)) + logdet_q -
           logdet_p;
}

// ---------------------------------------------------------------------------
// Assignment

namespace {

// Jonker-Volgenant style shortest augmenting path; fills row->col assignment
// and dual potentials u, v with c[i][j] - u[i] - v[j] >= 0 (0 on assigned edges).
void hungarian_potentials(const Matrix& cost, std::vector<std::size_t>& rowsol,
                          std::vector<double>& u, std::vector<double>& v) {
    const std::size_t n = cost.rows;
    std::vector<double> pu(n + 1, 0.0), pv(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);

    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            std::size_t i0 = p[j0], j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost.at(i0 - 1, j - 1) - pu[i0] - pv[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    pu[p[j]] += delta;
                    pv[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    rowsol.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) rowsol[p[j] - 1] = j - 1;
    u.assign(n, 0.0);
    v.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) u[i] = pu[i + 1];
    for (std::size_t j = 0; j < n; ++j) v[j] = pv[j + 1];
}

// Kuhn's algorithm: does `allowed` admit a perfect matching on rows `rows`
// against columns not in `banned_cols`?
bool has_perfect_matching(const std::vector<std::vector<std::size_t>>& adj,
                          const std::vector<std::size_t>& rows, std::vector<int>& col_match,
                          std::size_t n) {
    std::fill(col_match.begin(), col_match.end(), -1);
    std::vector<char> visited(n);
    std::function<bool(std::size_t)> try_row = [&](std::size_t r) -> bool {
        for (std::size_t c : adj[r]) {
            if (visited[c]) continue;
            visited[c] = 1;
            if (col_match[c] < 0 || try_row(static_cast<std::size_t>(col_match[c]))) {
                col_match[c] = static_cast<int>(r);
                return true;
            }
        }
        return false;
    };
    for (std::size_t r : rows) {
        std::fill(visited.begin(), visited.end(), 0);
        if (!try_row(r)) return false;
    }
    return true;
}

}  // namespace

std::vector<std::size_t> optimal_bipartite_match(const Matrix& cost) {
    if (cost.rows != cost.cols) throw Error(ErrorKind::NonSquare, "optimal_bipartite_match: non-square");
    const std::size_t n = cost.rows;
    for (double c : cost.data)
        if (!std::isfinite(c))
            throw Error(ErrorKind::InvalidConfig, "optimal_bipartite_match: non-finite cost");
    if (n == 0) return {};

    std::vector<std::size_t> rowsol;
    std::vector<double> u, v;
    hungarian_potentials(cost, rowsol, u, v);

    double scale = 0.0;
    for (double c : cost.data) scale = std::max(scale, std::abs(c));
    const double eps = 1e-9 * (1.0 + scale);

    // optimal permutations live on tight edges; pick the lexicographically
    // smallest perfect matching among them
    std::vector<std::vector<std::size_t>> tight(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(cost.at(i, j) - u[i] - v[j]) <= eps) tight[i].push_back(j);

    std::vector<std::size_t> result(n);
    std::vector<char> col_used(n, 0);
    std::vector<int> col_match(n);
    for (std::size_t i = 0; i < n; ++i) {
        bool fixed = false;
        for (std::size_t j : tight[i]) {
            if (col_used[j]) continue;
            // feasibility of completing rows i+1..n-1 on the remaining columns
            std::vector<std::vector<std::size_t>> adj(n);
            std::vector<std::size_t> rest;
            for (std::size_t r = i + 1; r < n; ++r) {
                rest.push_back(r);
                for (std::size_t c : tight[r])
                    if (!col_used[c] && c != j) adj[r].push_back(c);
            }
            if (has_perfect_matching(adj, rest, col_match, n)) {
                result[i] = j;
                col_used[j] = 1;
                fixed = true;
                break;
            }
        }
        if (!fixed)  // cannot happen: rowsol certifies at least one completion
            throw Error(ErrorKind::InvalidConfig, "optimal_bipartite_match: internal tight-edge failure");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Semantic partition

FederatedDataset semantic_partition(const std::vector<Example>& pool, std::size_t num_labels,
                                    std::size_t num_clients, const EmbedderConfig& embedder,
                                    const GmmConfig& gmm_cfg, std::uint64_t seed) {
    if (pool.empty()) throw Error(ErrorKind::EmptyPool, "semantic_partition: empty pool");
    const std::size_t c = num_clients;

    std::vector<std::vector<std::size_t>> by_label(num_labels);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].y >= num_labels)
            throw Error(ErrorKind::InvalidConfig, "semantic_partition: label out of range");
        by_label[pool[i].y].push_back(i);
    }
    std::vector<std::size_t> labels;
    for (std::size_t k = 0; k < num_labels; ++k)
        if (!by_label[k].empty()) {
            if (by_label[k].size() < c)
                throw Error(ErrorKind::TooFewPoints,
                            "semantic_partition: label " + std::to_string(k) + " has fewer examples than clients");
            labels.push_back(k);
        }

    // Stage 1: embed everything once, then per-label GMM clustering
    Matrix embedded = embed_examples(pool, embedder);
    const std::size_t m = embedded.cols;

    double mean_var = 0.0;
    {
        std::vector<double> mu(m, 0.0);
        for (std::size_t i = 0; i < embedded.rows; ++i)
            kern::axpy(1.0, embedded.row(i).data(), mu.data(), m);
        for (double& x : mu) x /= static_cast<double>(embedded.rows);
        for (std::size_t i = 0; i < embedded.rows; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                double t = embedded.at(i, j) - mu[j];
                mean_var += t * t;
            }
        mean_var /= static_cast<double>(embedded.rows * m);
    }
    const double reg = std::max(gmm_cfg.reg_scale * mean_var, 1e-10);

    SeededRng root = SeededRng(seed).derive("semantic_partition");

    std::vector<GaussianMixture> mixtures(num_labels);
    std::vector<std::vector<std::size_t>> cluster_of(num_labels);  // per label, per label-row
    for (std::size_t k : labels) {
        Matrix pts(by_label[k].size(), m);
        for (std::size_t r = 0; r < by_label[k].size(); ++r)
            std::copy(embedded.row(by_label[k][r]).begin(), embedded.row(by_label[k][r]).end(),
                      pts.row(r).begin());
        mixtures[k] = gmm_fit(pts, c, gmm_cfg.max_iters, gmm_cfg.tol, reg,
                              root.derive("gmm", k).next_u64());
        cluster_of[k] = gmm_assign(mixtures[k], pts);
    }

    // Stage 2: random label order, chained bipartite matchings on symmetrized
    // KL costs between consecutive labels' cluster Gaussians
    std::vector<std::size_t> order = labels;
    SeededRng orng = root.derive("label_order");
    orng.shuffle(order);

    std::vector<std::vector<std::size_t>> client_of(num_labels, std::vector<std::size_t>(c));
    std::iota(client_of[order.front()].begin(), client_of[order.front()].end(), std::size_t{0});

    for (std::size_t step = 1; step < order.size(); ++step) {
        std::size_t k = order[step - 1], k2 = order[step];
        Matrix cost(c, c);
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const Gaussian& gi = mixtures[k].components[i].second;
                const Gaussian& gj = mixtures[k2].components[j].second;
                cost.at(i, j) = 0.5 * (gaussian_kl(gi, gj) + gaussian_kl(gj, gi));
            }
        auto perm = optimal_bipartite_match(cost);  // cluster i of k -> cluster perm[i] of k2
        for (std::size_t i = 0; i < c; ++i) client_of[k2][perm[i]] = client_of[k][i];
    }

    FederatedDataset fd;
    fd.num_labels = num_labels;
    fd.feature_dim = pool.front().x.size();
    for (std::size_t i = 0; i < c; ++i) {
        ClientDataset cd;
        cd.id = client_name(i);
        fd.clients.emplace(cd.id, std::move(cd));
    }
    for (std::size_t k : labels) {
        for (std::size_t r = 0; r < by_label[k].size(); ++r) {
            std::size_t client = client_of[k][cluster_of[k][r]];
            fd.clients.at(client_name(client)).examples.push_back(pool[by_label[k][r]]);
        }
    }
    for (auto& [id, cd] : fd.clients) cd.weight = static_cast<double>(cd.examples.size());
    return fd;
}

}  // namespace fedgen
