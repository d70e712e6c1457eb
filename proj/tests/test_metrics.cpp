#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedgen/metrics.hpp"

using namespace fedgen;

namespace {

// A linear model rigged so predict(x) = round(x[0]) for 2 classes and the
// loss is whatever the logits make it.
ModelParams biased_model() {
    ModelSpec spec{ModelSpec::Kind::Linear, 0, 1, 2};
    ModelParams p{spec, {0.0, 10.0, 0.0, -5.0}};  // logit1 = 10 x - 5
    return p;
}

}  // namespace

TEST_CASE("eval_block: weighted vs uniform client averaging") {
    ModelParams p = biased_model();
    // client a: 2 examples, one right one wrong -> acc 0.5
    // client b: 6 examples all right -> acc 1.0
    std::map<std::string, std::vector<Example>> block;
    block["a"] = {{{1.0}, 1}, {{1.0}, 0}};
    block["b"] = {{{0.0}, 0}, {{0.0}, 0}, {{0.0}, 0}, {{0.0}, 0}, {{0.0}, 0}, {{0.0}, 0}};
    std::map<std::string, double> w;

    BlockEval size_prop = eval_block(p, block, w, RhoMode::SizeProportional);
    CHECK(size_prop.accuracy == doctest::Approx(0.875));
    BlockEval uniform = eval_block(p, block, w, RhoMode::Uniform);
    CHECK(uniform.accuracy == doctest::Approx(0.75));
    CHECK(size_prop.per_client.size() == 2);
    CHECK(size_prop.per_client[0].first == "a");

    std::map<std::string, std::vector<Example>> empty;
    CHECK_THROWS_AS(eval_block(p, empty, w, RhoMode::Uniform), Error);
}

TEST_CASE("eval_block: identical clients give matching block values") {
    ModelParams p = biased_model();
    std::vector<Example> shared = {{{0.9}, 1}, {{0.1}, 0}, {{0.8}, 1}};
    std::map<std::string, std::vector<Example>> few, many;
    few["u1"] = shared;
    few["u2"] = shared;
    for (int i = 0; i < 8; ++i) many["c" + std::to_string(i)] = shared;
    std::map<std::string, double> w;
    BlockEval a = eval_block(p, few, w, RhoMode::Uniform);
    BlockEval b = eval_block(p, many, w, RhoMode::Uniform);
    // summation order differs (2 vs 8 addends), so allow last-ulp slack
    CHECK(std::abs(a.loss - b.loss) < 1e-12);
    CHECK(std::abs(a.accuracy - b.accuracy) < 1e-12);
}

TEST_CASE("gaps: subtraction orientation") {
    auto [oos, part] = gaps(1.0, 1.2, 1.5);
    CHECK(oos == doctest::Approx(0.2));
    CHECK(part == doctest::Approx(0.3));

    auto [z1, z2] = gaps(0.4, 0.4, 0.4);
    CHECK(z1 == 0.0);
    CHECK(z2 == 0.0);

    // accuracy triple: participation accuracy gap is negative
    auto [oos_a, part_a] = gaps(97.5, 83.3, 81.6);
    CHECK(part_a == doctest::Approx(-1.7));
}

TEST_CASE("client_percentiles: interpolation rules") {
    auto p = client_percentiles({1, 2, 3, 4, 5});
    CHECK(p.at(50) == doctest::Approx(3.0));

    auto single = client_percentiles({4.2});
    for (auto& [pp, v] : single) CHECK(v == doctest::Approx(4.2));

    auto two = client_percentiles({10, 20});
    CHECK(two.at(95) == doctest::Approx(19.5));
    CHECK(two.at(5) == doctest::Approx(10.5));

    auto ext = client_percentiles({7, 3, 9, 1}, {0, 100});
    CHECK(ext.at(0) == doctest::Approx(1.0));
    CHECK(ext.at(100) == doctest::Approx(9.0));

    CHECK_THROWS_AS(client_percentiles({}), Error);
}

TEST_CASE("metrics csv: shape, determinism, gap re-derivability") {
    MetricsLog log;
    CHECK(metrics_csv_string(log) ==
          "index,part_train_loss,part_train_acc,part_val_loss,part_val_acc,unpart_loss,unpart_acc,"
          "oos_gap_loss,part_gap_loss,oos_gap_acc,part_gap_acc\n");

    RiskRecord r;
    r.index = 3;
    r.part_train_loss = 1.0;
    r.part_val_loss = 1.25;
    r.unpart_loss = 1.5;
    std::tie(r.oos_gap_loss, r.part_gap_loss) = gaps(r.part_train_loss, r.part_val_loss, r.unpart_loss);
    log.records.push_back(r);

    std::string s = metrics_csv_string(log);
    CHECK(std::count(s.begin(), s.end(), '\n') == 2);
    CHECK(s.find("3,1.000000,0.000000,1.250000,0.000000,1.500000,0.000000,0.250000,0.250000") !=
          std::string::npos);
    CHECK(metrics_csv_string(log) == s);

    const std::string path = "/tmp/fedgen_test_metrics.csv";
    write_metrics_csv(log, path);
    write_metrics_csv(log, path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == s);
    std::remove(path.c_str());
}

TEST_CASE("metrics csv: percentile columns when recorded") {
    MetricsLog log;
    RiskRecord r;
    r.part_val_acc_percentiles = std::map<int, double>{{95, 1}, {75, 1}, {50, 0.5}, {25, 0.25}, {5, 0}};
    r.unpart_acc_percentiles = std::map<int, double>{{95, 1}, {75, 0.75}, {50, 0.5}, {25, 0.25}, {5, 0}};
    log.records.push_back(r);
    std::string s = metrics_csv_string(log);
    CHECK(s.find("p95_part_val_acc") != std::string::npos);
    CHECK(s.find("p5_unpart_acc") != std::string::npos);
}
