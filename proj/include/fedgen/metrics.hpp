// Risk estimators across the three-way split, gap computations, percentiles, CSV export.
#pragma once
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedgen/models.hpp"
#include "fedgen/split.hpp"

namespace fedgen {

enum class RhoMode { Uniform, SizeProportional };

struct BlockEval {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<std::pair<std::string, std::pair<double, double>>> per_client;  // id -> (loss, acc)
};

struct RiskRecord {
    std::size_t index = 0;  // round or epoch
    double part_train_loss = 0, part_train_acc = 0;
    double part_val_loss = 0, part_val_acc = 0;
    double unpart_loss = 0, unpart_acc = 0;
    double oos_gap_loss = 0, part_gap_loss = 0;
    double oos_gap_acc = 0, part_gap_acc = 0;
    // per-client accuracy percentiles for part_val and unpart, keyed "p95".."p5"
    std::optional<std::map<int, double>> part_val_acc_percentiles;
    std::optional<std::map<int, double>> unpart_acc_percentiles;
};

struct MetricsLog {
    std::string config_digest;
    std::vector<RiskRecord> records;
};

BlockEval eval_block(const ModelParams& params,
                     const std::map<std::string, std::vector<Example>>& block,
                     const std::map<std::string, double>& weights, RhoMode rho_mode);

// out_of_sample = part_val - part_train; participation = unpart - part_val.
std::pair<double, double> gaps(double part_train, double part_val, double unpart);

// Linear interpolation between closest ranks (inclusive method).
std::map<int, double> client_percentiles(std::vector<double> values,
                                         const std::vector<int>& ps = {95, 75, 50, 25, 5});

// Evaluate all three blocks of a split and assemble a full record.
RiskRecord make_record(std::size_t index, const ModelParams& params, const ThreeWaySplit& split,
                       RhoMode rho_mode, bool with_percentiles);

void write_metrics_csv(const MetricsLog& log, const std::string& path);
std::string metrics_csv_string(const MetricsLog& log);

}  // namespace fedgen
