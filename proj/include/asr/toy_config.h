#pragma once

#include <span>
#include <string>

#include "asr/acoustic.h"

namespace asr {

/// Everything a toy training run needs. Stored as JSON; every key is
/// required so a run is fully described by its file:
///
///   {"network": "toy.net",            // relative to the config file
///    "data": {"num_samples": 500, "min_letters": 2, "max_letters": 4,
///             "min_letter_frames": 5, "max_letter_frames": 9,
///             "noise": 0.3, "seed": 1},
///    "train": {"epochs": 50, "holdout": 100, "learning_rate": 0.05,
///              "clip_norm": 1.0, "seed": 1}}
struct ToyRunConfig {
  NetworkSpec network;
  ToyTaskConfig data;
  TrainConfig train;
};

ToyRunConfig parse_toy_config(const std::string& json_text, const std::string& base_dir);
ToyRunConfig load_toy_config(const std::string& path);

/// "epoch,ler" header, then one row per epoch with 6 decimals.
std::string ler_curve_csv(std::span<const EpochStats> curve);

}  // namespace asr
