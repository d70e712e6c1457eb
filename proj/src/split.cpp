#include "fedgen/split.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "fedgen/numerics.hpp"

namespace fedgen {

std::pair<FederatedDataset, FederatedDataset> inter_client_split(const FederatedDataset& fd,
                                                                 double unpart_frac,
                                                                 std::uint64_t seed) {
    if (unpart_frac < 0.0 || unpart_frac >= 1.0)
        throw Error(ErrorKind::InvalidFraction, "inter_client_split: unpart_frac must be in [0, 1)");
    const std::size_t n = fd.clients.size();
    if (unpart_frac > 0.0 && n < 2)
        throw Error(ErrorKind::TooFewClients, "inter_client_split: need >= 2 clients to hold any out");

    std::size_t n_unpart = 0;
    if (unpart_frac > 0.0) {
        n_unpart = static_cast<std::size_t>(std::floor(unpart_frac * static_cast<double>(n) + 0.5));
        n_unpart = std::clamp<std::size_t>(n_unpart, 1, n - 1);
    }

    std::vector<const ClientDataset*> ordered;
    ordered.reserve(n);
    for (const auto& [id, cd] : fd.clients) ordered.push_back(&cd);

    SeededRng rng = SeededRng(seed).derive("inter_client_split");
    auto held = rng.sample_without_replacement(n, n_unpart);

    FederatedDataset part, unpart;
    part.num_labels = unpart.num_labels = fd.num_labels;
    part.feature_dim = unpart.feature_dim = fd.feature_dim;
    std::size_t h = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool is_held = h < held.size() && held[h] == i;
        if (is_held) ++h;
        auto& dst = is_held ? unpart : part;
        dst.clients.emplace(ordered[i]->id, *ordered[i]);
    }
    return {std::move(part), std::move(unpart)};
}

std::pair<std::map<std::string, std::vector<Example>>, std::map<std::string, std::vector<Example>>>
intra_client_split(const FederatedDataset& participating, double val_frac, std::uint64_t seed) {
    if (val_frac <= 0.0 || val_frac >= 1.0)
        throw Error(ErrorKind::InvalidFraction, "intra_client_split: val_frac must be in (0, 1)");

    std::map<std::string, std::vector<Example>> train, val;
    SeededRng root(seed);
    for (const auto& [id, cd] : participating.clients) {
        const std::size_t n = cd.examples.size();
        if (n < 2) {
            std::cerr << "warning: client " << id << " has " << n
                      << " example(s); keeping all in train, empty val\n";
            train[id] = cd.examples;
            val[id] = {};
            continue;
        }
        std::size_t n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n) + 0.5));
        n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

        SeededRng rng = root.derive("intra_client_split").derive(id);
        auto held = rng.sample_without_replacement(n, n_val);

        std::vector<Example> tr, va;
        std::size_t h = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (h < held.size() && held[h] == i) {
                va.push_back(cd.examples[i]);
                ++h;
            } else {
                tr.push_back(cd.examples[i]);
            }
        }
        train[id] = std::move(tr);
        val[id] = std::move(va);
    }
    return {std::move(train), std::move(val)};
}

ThreeWaySplit three_way_split(const FederatedDataset& fd, double unpart_frac, double val_frac,
                              std::uint64_t seed) {
    auto [part, unpart_fd] = inter_client_split(fd, unpart_frac, seed);
    auto [train, val] = intra_client_split(part, val_frac, seed);

    ThreeWaySplit s;
    s.part_train = std::move(train);
    s.part_val = std::move(val);
    for (const auto& [id, cd] : unpart_fd.clients) s.unpart[id] = cd.examples;
    for (const auto& [id, cd] : fd.clients) s.weights[id] = cd.weight;
    return s;
}

}  // namespace fedgen
