#pragma once

#include <array>
#include <vector>

#include "graspfuse/common.hpp"
#include "graspfuse/signal.hpp"

namespace graspfuse::features {

/// Z in R^{3C}, laid out [RMS_1..RMS_C, MAV_1..MAV_C, VAR_1..VAR_C].
struct FeatureVector {
    std::array<double, kFeatureDim> z{};
    double start_time_ms = 0.0;

    double rms(int c) const { return z[static_cast<std::size_t>(c)]; }
    double mav(int c) const { return z[static_cast<std::size_t>(kChannels + c)]; }
    double var(int c) const { return z[static_cast<std::size_t>(2 * kChannels + c)]; }
};

/// Per channel: RMS = sqrt(mean x^2), MAV = mean |x|, VAR = population
/// variance. Requires a 12-channel window of at least two samples.
FeatureVector extract_features(const signal::EmgWindow& w);

std::vector<FeatureVector> extract_all(const std::vector<signal::EmgWindow>& windows);

}  // namespace graspfuse::features
