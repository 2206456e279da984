#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uwbresp/corpus_io.hpp"
#include "uwbresp/iqved.hpp"

namespace uwbresp {

Json to_json(const NetworkConfig& c);
NetworkConfig network_config_from_json(const Json& j);
Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);

/// Columns: epoch, L_RC, L_IR, L_QR, L_DA, total.
std::string loss_history_csv(const std::vector<EpochStats>& history);

struct Checkpoint {
  NetworkConfig network;
  TrainConfig training;
  std::vector<EpochStats> history;
};

/// Writes `model.json` (configs, epoch, loss history, block table),
/// `params.f32` (every parameter, then every running mean and variance, in the
/// order of IqVed::params and IqVed::norms; each block column-major,
/// little-endian float32) and `loss_history.csv` into `dir`.
void save_checkpoint(const std::filesystem::path& dir, IqVed<float>& net, const TrainConfig& training,
                     const std::vector<EpochStats>& history);

/// Rebuilds the network and restores every block; rejects size mismatches.
IqVed<float> load_checkpoint(const std::filesystem::path& dir, Checkpoint* meta = nullptr);

}  // namespace uwbresp
