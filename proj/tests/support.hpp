#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "graspfuse/common.hpp"
#include "graspfuse/trial.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("graspfuse_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline graspfuse::Matrix sine_rows(int rows, int n, double freq_hz, double amplitude = 1.0,
                                   double fs = graspfuse::kSampleRateHz) {
    graspfuse::Matrix x(rows, n);
    for (int c = 0; c < rows; ++c) {
        for (int i = 0; i < n; ++i) x(c, i) = amplitude * std::sin(2.0 * 3.14159265358979323846 * freq_hz * i / fs);
    }
    return x;
}

inline graspfuse::TrialRecord make_trial(const graspfuse::Matrix& samples, int label = 1, int index = 1,
                                         std::string subject = "s01", std::string object = "o01") {
    graspfuse::TrialRecord t;
    t.subject_id = std::move(subject);
    t.object_id = std::move(object);
    t.trial_index = index;
    t.grasp_label = label;
    t.samples = samples;
    return t;
}

}  // namespace testing_support
