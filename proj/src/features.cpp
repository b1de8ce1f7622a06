#include "graspfuse/features.hpp"

#include <cmath>

namespace graspfuse::features {

FeatureVector extract_features(const signal::EmgWindow& w) {
    const auto& x = w.samples;
    if (x.rows() != kChannels) fail("features: window must have 12 channels");
    if (x.cols() < 2) fail("features: window needs at least two samples");

    FeatureVector out;
    out.start_time_ms = w.start_time_ms;
    const double n = static_cast<double>(x.cols());
    for (int c = 0; c < kChannels; ++c) {
        // single pass: Welford for the variance, plain sums for power and |x|
        double mean = 0.0, m2 = 0.0, sum_sq = 0.0, sum_abs = 0.0;
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            const double v = x(c, k);
            if (!std::isfinite(v)) {
                fail("features: non-finite sample at channel " + std::to_string(c) + ", index " + std::to_string(k));
            }
            const double delta = v - mean;
            mean += delta / static_cast<double>(k + 1);
            m2 += delta * (v - mean);
            sum_sq += v * v;
            sum_abs += std::abs(v);
        }
        out.z[static_cast<std::size_t>(c)] = std::sqrt(sum_sq / n);
        out.z[static_cast<std::size_t>(kChannels + c)] = sum_abs / n;
        out.z[static_cast<std::size_t>(2 * kChannels + c)] = std::max(m2, 0.0) / n;
    }
    return out;
}

std::vector<FeatureVector> extract_all(const std::vector<signal::EmgWindow>& windows) {
    std::vector<FeatureVector> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(extract_features(w));
    return out;
}

}  // namespace graspfuse::features
