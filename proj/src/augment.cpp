#include "gswan/augment.hpp"

#include <stdexcept>
#include <vector>

#include "gswan/errors.hpp"

namespace gswan {

void AugmentConfig::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_occlude) || !prob(p_permute)) throw ConfigError("augment: probabilities must be in [0,1]");
    if (occlude_scale < 0.0 || noise_scale < 0.0) throw ConfigError("augment: scales must be nonnegative");
}

namespace {

void check_window_shape(const Array& input) {
    if (input.rank() != 3) throw std::invalid_argument("augment: expected window input [D,N,L], got " + input.shape().str());
}

}  // namespace

Array spatial_occlusion(const Array& input, const AugmentConfig& cfg, Rng& rng) {
    check_window_shape(input);
    Array out = input;
    const std::int64_t n = input.extent(1), len = input.extent(2);
    for (std::int64_t s = 0; s < n; ++s) {
        if (rng.uniform01() < cfg.p_occlude) {
            for (std::int64_t t = 0; t < len; ++t) out.at(0, s, t) *= cfg.occlude_scale;
        }
    }
    return out;
}

Array temporal_permutation(const Array& input, const AugmentConfig& cfg, Rng& rng) {
    check_window_shape(input);
    Array out = input;
    const std::int64_t c = input.extent(0), n = input.extent(1), len = input.extent(2);
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t t = 0; t < len; ++t) {
        if (rng.uniform01() >= cfg.p_permute) continue;
        for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
        for (std::int64_t i = n - 1; i > 0; --i) {
            const std::int64_t j = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
        }
        for (std::int64_t ch = 0; ch < c; ++ch)
            for (std::int64_t s = 0; s < n; ++s) out.at(ch, s, t) = input.at(ch, perm[static_cast<std::size_t>(s)], t);
    }
    return out;
}

Array uniform_noise(const Array& input, const AugmentConfig& cfg, double train_std, Rng& rng) {
    check_window_shape(input);
    if (train_std < 0.0) throw std::invalid_argument("augment: train_std must be nonnegative");
    Array out = input;
    const double s = cfg.noise_scale * train_std;
    const std::int64_t n = input.extent(1), len = input.extent(2);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t t = 0; t < len; ++t) out.at(0, i, t) += rng.uniform(-s, s);
    return out;
}

Array augment_window(const Array& input, const AugmentConfig& cfg, double train_std, std::uint64_t datapoint_index) {
    Rng rng(derive_seed(cfg.seed, "augment", datapoint_index));
    Array out = spatial_occlusion(input, cfg, rng);
    out = temporal_permutation(out, cfg, rng);
    out = uniform_noise(out, cfg, train_std, rng);
    return out;
}

}  // namespace gswan
