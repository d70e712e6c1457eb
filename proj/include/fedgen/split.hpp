// Three-way split: inter-client hold-out plus intra-client train/val hold-out.
#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedgen/datasets.hpp"

namespace fedgen {

struct ThreeWaySplit {
    std::map<std::string, std::vector<Example>> part_train;
    std::map<std::string, std::vector<Example>> part_val;
    std::map<std::string, std::vector<Example>> unpart;
    std::map<std::string, double> weights;
};

// Hold out round(unpart_frac * num_clients) clients uniformly, keeping at
// least one client on each nonempty side.
std::pair<FederatedDataset, FederatedDataset> inter_client_split(const FederatedDataset& fd,
                                                                 double unpart_frac,
                                                                 std::uint64_t seed);

// Per-client hold-out of clamp(round(val_frac*n), 1, n-1) validation
// examples; singleton clients keep their example in train (warning on stderr).
std::pair<std::map<std::string, std::vector<Example>>, std::map<std::string, std::vector<Example>>>
intra_client_split(const FederatedDataset& participating, double val_frac, std::uint64_t seed);

ThreeWaySplit three_way_split(const FederatedDataset& fd, double unpart_frac, double val_frac,
                              std::uint64_t seed);

}  // namespace fedgen
