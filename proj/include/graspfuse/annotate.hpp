#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graspfuse/features.hpp"
#include "graspfuse/ggs.hpp"
#include "graspfuse/signal.hpp"
#include "graspfuse/trial.hpp"

namespace graspfuse::annotate {

/// Phase boundaries of one trial on its own sample clock (lead-in included).
/// Samples before `reach_start` belong to the preceding rest.
struct TrialTimeline {
    double sample_rate_hz = kSampleRateHz;
    int reach_start = 0;
    int grasp_start = 0;
    int return_start = 0;
    int rest_start = 0;
    int end = 0;

    /// Breakpoints of `seg` are in block units of `hop_samples`, counted from
    /// `offset_samples`.
    static TrialTimeline from_segmentation(const ggs::Segmentation& seg, int offset_samples, int hop_samples,
                                           int total_samples, double sample_rate_hz);

    double ms(int sample) const { return 1000.0 * sample / sample_rate_hz; }
    Phase phase_of_sample(int sample) const;
    bool before_reach(int sample) const { return sample < reach_start; }
    void validate() const;
};

struct LabeledWindow {
    features::FeatureVector features;
    Phase phase = Phase::Rest;
    int label = 0;  // 0 = rest, else the trial's grasp label
    int final_sample = 0;
    double decision_time_ms = 0.0;
};

/// Labels each window by the phase holding its final sample: rest -> 0,
/// reach/grasp/return -> `grasp_label`.
std::vector<LabeledWindow> annotate_windows(const std::vector<features::FeatureVector>& feats,
                                            const signal::WindowGeometry& geometry, const TrialTimeline& timeline,
                                            int grasp_label);

/// Preprocess, window, extract features and annotate one trial.
std::vector<LabeledWindow> annotate_trial(const TrialRecord& trial, const MvcProfile& mvc,
                                          const TrialTimeline& timeline, const signal::PreprocessConfig& cfg = {});

struct TrialKey {
    std::string subject_id;
    std::string object_id;
    int trial_index = 1;
    std::string trial_id;
};

struct ObjectSplit {
    std::string subject_id;
    std::string object_id;
    std::vector<std::string> train;       // 4 trial ids
    std::vector<std::string> validation;  // 2 trial ids
};

/// Seeded uniform 4/2 split of the six trials of every (subject, object).
/// Groups come out sorted by (subject, object).
std::vector<ObjectSplit> split_trials(const std::vector<TrialKey>& trials, std::uint64_t seed);

enum class SplitRole { Train, Validation };

/// Drops return-phase windows from training data; validation passes through.
std::vector<LabeledWindow> training_filter(std::vector<LabeledWindow> windows, SplitRole role = SplitRole::Train);

}  // namespace graspfuse::annotate
