#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspfuse/annotate.hpp"
#include "graspfuse/common.hpp"
#include "graspfuse/ggs.hpp"
#include "graspfuse/trial.hpp"

namespace graspfuse::synth {

struct DurationRange {
    double min_ms = 0.0;
    double max_ms = 0.0;
};

using ChannelMeans = std::array<double, kChannels>;
/// Envelope means indexed by Phase (reach, grasp, return, rest).
using PhaseMeans = std::array<ChannelMeans, 4>;

struct ScenarioSpec {
    int n_subjects = 2;
    int n_objects = 13;
    std::vector<int> labels;  // grasp label of each object; empty means 1..n_objects
    int trials_per_object = 6;

    // Phase durations are drawn uniformly on the hop grid inside these ranges.
    DurationRange reach{800.0, 1000.0};
    DurationRange grasp{1000.0, 1200.0};
    DurationRange ret{800.0, 1000.0};
    DurationRange rest{1000.0, 1200.0};
    double lead_in_ms = 1024.0;  // rest recorded before the cue
    double hop_ms = 32.0;

    std::map<int, PhaseMeans> means;  // per grasp label; missing labels get generated means
    std::array<double, 4> envelope_cv{0.1, 0.1, 0.1, 0.02};  // per-hop multiplicative jitter by Phase
    std::array<double, 4> trial_sd{0.06, 0.02, 0.06, 0.0};  // per-trial mean offset by Phase, MVC units
    double separation = 1.0;          // 0 collapses every mean onto the grand mean
    double rest_level = 0.02;
    bool emg_rest_degradation = true;  // rest envelope carries no label information

    std::array<double, 4> vision_confusion{0.3, 0.9, 0.25, 0.1};  // by Phase
    double vision_rate_hz = 60.0;

    double volts_scale = 1e-4;
    std::uint64_t seed = 7;

    int label_of(int object) const;  // object is 1-based
    const PhaseMeans& means_for(int label) const;
    void validate() const;
};

/// Spec with generated means for every label in use.
ScenarioSpec default_scenario(std::uint64_t seed = 7);

/// Generates means for labels that have none. Grasp means are label
/// patterns, reach and return mix a shared transport pattern with the
/// label pattern, rest is low and shared unless rest degradation is off.
void fill_default_means(ScenarioSpec& spec);

nlohmann::ordered_json scenario_to_json(const ScenarioSpec& spec);
/// Keys left out keep their defaults; means are filled afterwards.
ScenarioSpec scenario_from_json(const nlohmann::ordered_json& doc);

std::string subject_name(int subject);  // "s01"
std::string object_name(int object);    // "o01"

/// A generated trial with its planted schedule.
struct PlantedTrial {
    TrialRecord trial;
    ggs::Segmentation planted;         // breakpoints in hops after the lead-in
    annotate::TrialTimeline timeline;  // same schedule in samples
    std::vector<ChannelMeans> block_envelope;  // per hop from sample 0, before the carrier
};

/// Subjects, objects and trials are 1-based.
PlantedTrial gen_trial(const ScenarioSpec& spec, int subject, int object, int trial_index);

/// One burst per channel at full contraction, the others at rest level.
TrialRecord gen_mvc_trial(const ScenarioSpec& spec, int subject);

/// 60 Hz gaze and detection frames over [0, schedule.end). The gazed box
/// carries a posterior peaked on `label`, or with probability
/// confusion[phase] on another label.
std::vector<DetectionFrame> gen_vision_stream(int label, const annotate::TrialTimeline& schedule,
                                              const std::array<double, 4>& confusion, std::uint64_t seed,
                                              double rate_hz = 60.0);

}  // namespace graspfuse::synth
