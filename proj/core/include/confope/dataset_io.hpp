#pragma once

#include <string>

#include "confope/types.hpp"

namespace confope {

// Flat CSV with header o_minus,o,a,r,o_plus (observations as index or
// decimal) plus a sidecar metadata record at sidecar_path(path) holding
// env id, seed, n, gamma, the observation kind and nu_O.
void write_tuples_csv(const std::string& path, const TupleDataset& data);
TupleDataset read_tuples_csv(const std::string& path);

// Bandit records, header o_minus,a,o,r, with the same sidecar convention.
void write_bandit_csv(const std::string& path, const BanditDataset& data);
BanditDataset read_bandit_csv(const std::string& path);

inline std::string sidecar_path(const std::string& csv_path) {
  return csv_path + ".meta.json";
}

}  // namespace confope
