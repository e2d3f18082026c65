#pragma once

#include <cstdint>
#include <string>

#include "gswan/dataset.hpp"
#include "gswan/model.hpp"

namespace gswan {

// Versioned JSON manifest of every named parameter (shape + row-major
// values), the batch-norm running state, and the training-time scaler.
// Doubles survive a save/load round trip bit-exactly.
struct LoadedCheckpoint {
    ModelParams params;
    Scaler scaler;
    std::uint64_t seed = 0;
};

void save_checkpoint(const ModelParams& params, const Scaler& scaler, std::uint64_t seed, const std::string& path);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace gswan
