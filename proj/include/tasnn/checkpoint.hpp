#pragma once

#include <string>

#include "tasnn/config.hpp"

namespace tasnn {

// Versioned binary container: "TASN" magic, u32 version, a JSON metadata
// blob (network spec, experiment config, training history), then every
// parameter tensor as little-endian f64. Writing is byte-deterministic.
void save_checkpoint(const std::string& path, Network& net,
                     const ExperimentConfig& cfg, const History& history);

struct Checkpoint {
  Network net;
  ExperimentConfig config;
  History history;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace tasnn
