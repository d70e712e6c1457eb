#include "fedgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fedgen {

BlockEval eval_block(const ModelParams& params,
                     const std::map<std::string, std::vector<Example>>& block,
                     const std::map<std::string, double>& weights, RhoMode rho_mode) {
    if (block.empty()) throw Error(ErrorKind::EmptyBlock, "eval_block: empty block");
    (void)weights;  // stored rho kept for future weighting modes; wrho below follows rho_mode

    BlockEval out;
    double wsum = 0.0, loss_acc = 0.0, acc_acc = 0.0;
    for (const auto& [id, examples] : block) {  // ascending client id
        if (examples.empty()) {
            std::cerr << "warning: eval_block skipping empty client " << id << "\n";
            continue;
        }
        double l = loss(params, examples);
        std::size_t correct = 0;
        for (const auto& ex : examples)
            if (predict(params, ex.x) == ex.y) ++correct;
        double a = static_cast<double>(correct) / static_cast<double>(examples.size());
        double w = rho_mode == RhoMode::Uniform ? 1.0 : static_cast<double>(examples.size());
        wsum += w;
        loss_acc += w * l;
        acc_acc += w * a;
        out.per_client.emplace_back(id, std::make_pair(l, a));
    }
    if (wsum <= 0.0) throw Error(ErrorKind::EmptyBlock, "eval_block: no non-empty clients");
    out.loss = loss_acc / wsum;
    out.accuracy = acc_acc / wsum;
    return out;
}

std::pair<double, double> gaps(double part_train, double part_val, double unpart) {
    return {part_val - part_train, unpart - part_val};
}

std::map<int, double> client_percentiles(std::vector<double> values, const std::vector<int>& ps) {
    if (values.empty()) throw Error(ErrorKind::EmptyInput, "client_percentiles: empty input");
    std::sort(values.begin(), values.end());
    std::map<int, double> out;
    const double n = static_cast<double>(values.size());
    for (int p : ps) {
        double rank = (p / 100.0) * (n - 1.0);
        std::size_t lo = static_cast<std::size_t>(std::floor(rank));
        std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
        double frac = rank - static_cast<double>(lo);
        out[p] = values[lo] + frac * (values[hi] - values[lo]);
    }
    return out;
}

RiskRecord make_record(std::size_t index, const ModelParams& params, const ThreeWaySplit& split,
                       RhoMode rho_mode, bool with_percentiles) {
    RiskRecord r;
    r.index = index;
    BlockEval tr = eval_block(params, split.part_train, split.weights, rho_mode);
    BlockEval va = eval_block(params, split.part_val, split.weights, rho_mode);
    r.part_train_loss = tr.loss;
    r.part_train_acc = tr.accuracy;
    r.part_val_loss = va.loss;
    r.part_val_acc = va.accuracy;

    bool have_unpart = !split.unpart.empty();
    if (have_unpart) {
        BlockEval un = eval_block(params, split.unpart, split.weights, rho_mode);
        r.unpart_loss = un.loss;
        r.unpart_acc = un.accuracy;
        if (with_percentiles) {
            std::vector<double> accs;
            for (const auto& [id, la] : un.per_client) accs.push_back(la.second);
            r.unpart_acc_percentiles = client_percentiles(accs);
        }
    } else {
        r.unpart_loss = va.loss;  // no held-out clients; gap degenerates to 0
        r.unpart_acc = va.accuracy;
    }
    if (with_percentiles) {
        std::vector<double> accs;
        for (const auto& [id, la] : va.per_client) accs.push_back(la.second);
        r.part_val_acc_percentiles = client_percentiles(accs);
    }

    std::tie(r.oos_gap_loss, r.part_gap_loss) = gaps(r.part_train_loss, r.part_val_loss, r.unpart_loss);
    std::tie(r.oos_gap_acc, r.part_gap_acc) = gaps(r.part_train_acc, r.part_val_acc, r.unpart_acc);
    return r;
}

static void append_num(std::string& s, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    s += buf;
}

std::string metrics_csv_string(const MetricsLog& log) {
    const std::vector<int> ps = {95, 75, 50, 25, 5};
    bool with_pct = !log.records.empty() && log.records.front().part_val_acc_percentiles.has_value();

    std::string s =
        "index,part_train_loss,part_train_acc,part_val_loss,part_val_acc,unpart_loss,unpart_acc,"
        "oos_gap_loss,part_gap_loss,oos_gap_acc,part_gap_acc";
    if (with_pct) {
        for (int p : ps) s += ",p" + std::to_string(p) + "_part_val_acc";
        for (int p : ps) s += ",p" + std::to_string(p) + "_unpart_acc";
    }
    s += '\n';

    for (const auto& r : log.records) {
        s += std::to_string(r.index);
        for (double v : {r.part_train_loss, r.part_train_acc, r.part_val_loss, r.part_val_acc,
                         r.unpart_loss, r.unpart_acc, r.oos_gap_loss, r.part_gap_loss, r.oos_gap_acc,
                         r.part_gap_acc}) {
            s += ',';
            append_num(s, v);
        }
        if (with_pct) {
            for (int p : ps) {
                s += ',';
                append_num(s, r.part_val_acc_percentiles ? r.part_val_acc_percentiles->at(p) : 0.0);
            }
            for (int p : ps) {
                s += ',';
                append_num(s, r.unpart_acc_percentiles ? r.unpart_acc_percentiles->at(p) : 0.0);
            }
        }
        s += '\n';
    }
    return s;
}

void write_metrics_csv(const MetricsLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << metrics_csv_string(log);
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
}

}  // namespace fedgen
