#pragma once

#include <filesystem>
#include <iosfwd>

#include "chanprune/network.h"

namespace chanprune {

// Text header (format version, layer specs, tensor shapes) terminated by a
// "data" line, then each tensor as little-endian float32 in declaration
// order: for each weighted layer, weight then bias.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  NetworkDef net;
  WeightStore weights;
};

void write_checkpoint(std::ostream& out, const NetworkDef& net, const WeightStore& weights);
Checkpoint read_checkpoint(std::istream& in);

// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const NetworkDef& net,
                     const WeightStore& weights);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace chanprune
