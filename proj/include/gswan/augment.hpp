#pragma once

#include <cstdint>

#include "gswan/array.hpp"
#include "gswan/rng.hpp"

namespace gswan {

// Training-time augmentation of one datapoint; never applied at evaluation.
struct AugmentConfig {
    double p_occlude = 0.05;      // per-sensor selection probability
    double occlude_scale = 0.05;  // factor applied to a selected sensor's metric channel
    double p_permute = 0.05;      // per-timestep sensor-shuffle probability
    double noise_scale = 0.05;    // uniform noise half-width as a fraction of the training std
    std::uint64_t seed = 0;

    void validate() const;
};

// Each selected sensor has its channel-0 values scaled across the whole window.
Array spatial_occlusion(const Array& input, const AugmentConfig& cfg, Rng& rng);

// Each selected timestep gets one fresh uniform permutation of the sensor
// axis; all channels move together so records stay intact.
Array temporal_permutation(const Array& input, const AugmentConfig& cfg, Rng& rng);

// i.i.d. uniform noise on [-s, s], s = noise_scale * train_std, on channel 0.
Array uniform_noise(const Array& input, const AugmentConfig& cfg, double train_std, Rng& rng);

// occlusion -> permutation -> noise with a generator fully determined by
// (cfg.seed, datapoint_index)
Array augment_window(const Array& input, const AugmentConfig& cfg, double train_std, std::uint64_t datapoint_index);

}  // namespace gswan
