#include "graspfuse/annotate.hpp"

#include <algorithm>
#include <map>
#include <random>

namespace graspfuse::annotate {

TrialTimeline TrialTimeline::from_segmentation(const ggs::Segmentation& seg, int offset_samples, int hop_samples,
                                               int total_samples, double sample_rate_hz) {
    if (seg.breakpoints.size() != 3) {
        fail("timeline: segmentation must have 3 breakpoints, found " + std::to_string(seg.breakpoints.size()));
    }
    TrialTimeline t;
    t.sample_rate_hz = sample_rate_hz;
    t.reach_start = offset_samples;
    t.grasp_start = offset_samples + seg.breakpoints[0] * hop_samples;
    t.return_start = offset_samples + seg.breakpoints[1] * hop_samples;
    t.rest_start = offset_samples + seg.breakpoints[2] * hop_samples;
    t.end = total_samples;
    t.validate();
    return t;
}

void TrialTimeline::validate() const {
    if (!(0 <= reach_start && reach_start < grasp_start && grasp_start < return_start && return_start < rest_start &&
          rest_start < end)) {
        fail("timeline: phase boundaries must be strictly increasing inside the trial");
    }
}

Phase TrialTimeline::phase_of_sample(int sample) const {
    if (sample < reach_start) return Phase::Rest;
    if (sample < grasp_start) return Phase::Reach;
    if (sample < return_start) return Phase::Grasp;
    if (sample < rest_start) return Phase::Return;
    return Phase::Rest;
}

std::vector<LabeledWindow> annotate_windows(const std::vector<features::FeatureVector>& feats,
                                            const signal::WindowGeometry& geometry, const TrialTimeline& timeline,
                                            int grasp_label) {
    if (grasp_label < 1 || grasp_label > kGraspLabels) fail("annotate: grasp label outside 1..13");
    std::vector<LabeledWindow> out;
    out.reserve(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
        LabeledWindow w;
        w.features = feats[i];
        w.final_sample = static_cast<int>(i) * geometry.hop_samples + geometry.length_samples - 1;
        w.decision_time_ms = signal::window_decision_time_ms(static_cast<int>(i), geometry, timeline.sample_rate_hz);
        w.phase = timeline.phase_of_sample(w.final_sample);
        w.label = w.phase == Phase::Rest ? kRestLabel : grasp_label;
        out.push_back(w);
    }
    return out;
}

std::vector<LabeledWindow> annotate_trial(const TrialRecord& trial, const MvcProfile& mvc,
                                          const TrialTimeline& timeline, const signal::PreprocessConfig& cfg) {
    const auto env = signal::preprocess(trial, mvc, cfg);
    const auto windows = signal::slide_windows(env, cfg.window_ms, cfg.hop_ms);
    const auto geometry = signal::window_geometry(trial.sample_rate_hz, cfg.window_ms, cfg.hop_ms);
    return annotate_windows(features::extract_all(windows), geometry, timeline, trial.grasp_label);
}

std::vector<ObjectSplit> split_trials(const std::vector<TrialKey>& trials, std::uint64_t seed) {
    std::map<std::pair<std::string, std::string>, std::vector<TrialKey>> groups;
    for (const auto& t : trials) groups[{t.subject_id, t.object_id}].push_back(t);

    std::vector<ObjectSplit> out;
    for (auto& [key, members] : groups) {
        if (members.size() != 6) {
            fail("split: object " + key.second + " of subject " + key.first + " has " +
                 std::to_string(members.size()) + " trials, expected 6");
        }
        std::ranges::sort(members, [](const TrialKey& a, const TrialKey& b) {
            return a.trial_index != b.trial_index ? a.trial_index < b.trial_index : a.trial_id < b.trial_id;
        });
        std::mt19937_64 rng(derive_seed(seed, stable_hash(key.first + "/" + key.second)));
        std::shuffle(members.begin(), members.end(), rng);

        ObjectSplit split{key.first, key.second, {}, {}};
        for (std::size_t i = 0; i < members.size(); ++i) {
            (i < 4 ? split.train : split.validation).push_back(members[i].trial_id);
        }
        std::ranges::sort(split.train);
        std::ranges::sort(split.validation);
        out.push_back(std::move(split));
    }
    return out;
}

std::vector<LabeledWindow> training_filter(std::vector<LabeledWindow> windows, SplitRole role) {
    if (role == SplitRole::Validation) return windows;
    std::erase_if(windows, [](const LabeledWindow& w) { return w.phase == Phase::Return; });
    return windows;
}

}  // namespace graspfuse::annotate
