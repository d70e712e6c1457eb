#include <doctest.h>

#include <set>

#include "fedgen/split.hpp"

using namespace fedgen;

namespace {
FederatedDataset uniform_fd(std::size_t clients, std::size_t per_client, std::uint64_t seed = 1) {
    SyntheticMetaConfig cfg;
    cfg.num_clients = clients;
    cfg.examples_per_client = per_client;
    return generate_synthetic(cfg, seed);
}
}  // namespace

TEST_CASE("inter_client_split: 20% of 10 clients") {
    auto fd = uniform_fd(10, 10);
    auto [part, unpart] = inter_client_split(fd, 0.2, 3);
    CHECK(part.clients.size() == 8);
    CHECK(unpart.clients.size() == 2);
    for (const auto& [id, cd] : unpart.clients) CHECK(part.clients.count(id) == 0);
}

TEST_CASE("inter_client_split: frac 0 keeps everyone") {
    auto fd = uniform_fd(5, 4);
    auto [part, unpart] = inter_client_split(fd, 0.0, 3);
    CHECK(part.clients.size() == 5);
    CHECK(unpart.clients.empty());
}

TEST_CASE("inter_client_split: min-1 guard with 2 clients") {
    auto fd = uniform_fd(2, 4);
    auto [part, unpart] = inter_client_split(fd, 0.99, 3);
    CHECK(part.clients.size() == 1);
    CHECK(unpart.clients.size() == 1);
}

TEST_CASE("inter_client_split: invalid inputs") {
    auto fd = uniform_fd(3, 4);
    CHECK_THROWS_AS(inter_client_split(fd, 1.0, 3), Error);
    CHECK_THROWS_AS(inter_client_split(fd, -0.1, 3), Error);
    auto one = uniform_fd(1, 4);
    CHECK_THROWS_AS(inter_client_split(one, 0.5, 3), Error);
}

TEST_CASE("intra_client_split: rounding rules") {
    auto check_counts = [](std::size_t n, double frac, std::size_t want_val) {
        auto fd = uniform_fd(1, n);
        auto [train, val] = intra_client_split(fd, frac, 7);
        CHECK(val.at("client_0000").size() == want_val);
        CHECK(train.at("client_0000").size() == n - want_val);
    };
    check_counts(10, 0.2, 2);
    check_counts(5, 0.2, 1);
    check_counts(2, 0.9, 1);  // clamp keeps one example in train
}

TEST_CASE("intra_client_split: singleton client keeps train, empty val") {
    auto fd = uniform_fd(1, 1);
    auto [train, val] = intra_client_split(fd, 0.2, 7);
    CHECK(train.at("client_0000").size() == 1);
    CHECK(val.at("client_0000").empty());
}

TEST_CASE("three_way_split: structure and conservation") {
    auto fd = uniform_fd(10, 10);
    ThreeWaySplit s = three_way_split(fd, 0.2, 0.2, 11);

    CHECK(s.part_train.size() == 8);
    CHECK(s.part_val.size() == 8);
    CHECK(s.unpart.size() == 2);
    std::size_t total = 0;
    for (const auto& [id, ex] : s.part_train) {
        CHECK(ex.size() == 8);
        CHECK(s.part_val.count(id) == 1);
        CHECK(s.unpart.count(id) == 0);
        total += ex.size();
    }
    for (const auto& [id, ex] : s.part_val) {
        CHECK(ex.size() == 2);
        total += ex.size();
    }
    for (const auto& [id, ex] : s.unpart) {
        CHECK(ex.size() == 10);
        total += ex.size();
    }
    CHECK(total == fd.total_examples());
    CHECK(s.weights.size() == 10);

    // per-client train/val partition covers the original examples exactly
    for (const auto& [id, tr] : s.part_train) {
        std::set<std::vector<double>> seen;
        for (const auto& ex : tr) seen.insert(ex.x);
        for (const auto& ex : s.part_val.at(id)) CHECK(seen.insert(ex.x).second);
        CHECK(seen.size() == fd.clients.at(id).examples.size());
    }
}

TEST_CASE("three_way_split: deterministic; seed changes membership not counts") {
    auto fd = uniform_fd(10, 10);
    ThreeWaySplit a = three_way_split(fd, 0.2, 0.2, 11);
    ThreeWaySplit b = three_way_split(fd, 0.2, 0.2, 11);
    CHECK((a.part_train == b.part_train));
    ThreeWaySplit c = three_way_split(fd, 0.2, 0.2, 12);
    CHECK(c.part_train.size() == a.part_train.size());
    for (const auto& [id, ex] : c.part_train)
        CHECK(ex.size() == 8);
    bool differs = a.part_train != c.part_train || a.unpart != c.unpart;
    CHECK(differs);
}
