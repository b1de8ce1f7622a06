#include "graspfuse/trial.hpp"

#include <cmath>

namespace graspfuse {

std::string_view session_name(Session s) {
    return s == Session::Clockwise ? "clockwise" : "counterclockwise";
}

Session session_from_name(std::string_view name) {
    if (name == "clockwise") return Session::Clockwise;
    if (name == "counterclockwise") return Session::Counterclockwise;
    throw Error(ErrorKind::Parse, "unknown session '" + std::string(name) + "'");
}

std::string TrialRecord::trial_id() const {
    if (is_mvc) return subject_id + "_mvc";
    return subject_id + "_" + object_id + "_" + (session == Session::Clockwise ? "cw" : "ccw") + "_t" +
           std::to_string(trial_index);
}

void TrialRecord::validate() const {
    const std::string id = trial_id();
    if (channels() != kChannels) {
        throw Error(ErrorKind::Schema, "trial " + id + ": expected " + std::to_string(kChannels) +
                                           " channels, found " + std::to_string(channels()));
    }
    if (length() < 1) throw Error(ErrorKind::Schema, "trial " + id + ": no samples");
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
        throw Error(ErrorKind::Schema, "trial " + id + ": sample rate must be positive");
    }
    if (!is_mvc) {
        if (grasp_label < 1 || grasp_label > kGraspLabels) {
            throw Error(ErrorKind::Schema, "trial " + id + ": grasp label " + std::to_string(grasp_label) +
                                               " outside 1..13");
        }
        if (trial_index < 1 || trial_index > 6) {
            throw Error(ErrorKind::Schema, "trial " + id + ": trial index outside 1..6");
        }
    }
    if (lead_in_samples < 0 || lead_in_samples >= length()) {
        throw Error(ErrorKind::Schema, "trial " + id + ": lead-in outside the recording");
    }
}

void MvcProfile::validate() const {
    if (mvc_value.size() != kChannels) {
        fail("MVC profile for " + subject_id + ": expected " + std::to_string(kChannels) + " channels");
    }
    for (int c = 0; c < mvc_value.size(); ++c) {
        if (!(mvc_value[c] > 0.0) || !std::isfinite(mvc_value[c])) {
            fail("MVC profile for " + subject_id + ": channel " + std::to_string(c) + " is not positive");
        }
    }
}

void DetectionFrame::validate() const {
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i];
        if (!(b.w > 0.0) || !(b.h > 0.0) || !std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) ||
            !std::isfinite(b.h)) {
            fail("detection frame at " + std::to_string(time_ms) + " ms: box " + std::to_string(i) +
                 " has invalid geometry");
        }
        if (b.probs.size() != kGraspLabels || b.probs.first_label() != 1) {
            fail("detection frame at " + std::to_string(time_ms) + " ms: box " + std::to_string(i) +
                 " must carry 13 grasp probabilities");
        }
        b.probs.validate(1e-6);
    }
}

}  // namespace graspfuse
