#pragma once

#include <string>
#include <vector>

#include "graspfuse/common.hpp"

namespace graspfuse {

enum class Session { Clockwise, Counterclockwise };

std::string_view session_name(Session s);
Session session_from_name(std::string_view name);

/// One reach-to-grasp recording. `samples` is C x N in volts.
///
/// `lead_in_samples` counts the samples at the head of the recording that
/// precede the trial cue (the tail of the previous trial's rest). Segmentation
/// ignores them; evaluation uses them to show the rest preceding the reach.
/// MVC recordings set `is_mvc` and carry no grasp label.
struct TrialRecord {
    std::string subject_id;
    std::string object_id;
    int trial_index = 1;
    Session session = Session::Clockwise;
    int grasp_label = 1;
    double sample_rate_hz = kSampleRateHz;
    Matrix samples;
    int lead_in_samples = 0;
    bool is_mvc = false;

    int channels() const { return static_cast<int>(samples.rows()); }
    int length() const { return static_cast<int>(samples.cols()); }

    /// "<subject>_<object>_<session>_t<index>", or "<subject>_mvc".
    std::string trial_id() const;

    void validate() const;
};

struct MvcProfile {
    std::string subject_id;
    Vector mvc_value;  // one positive entry per channel

    void validate() const;
};

struct DetectionBox {
    double x = 0.0;  // top-left corner, pixels
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
    ClassPosterior probs;  // over grasp labels 1..13

    double area() const { return w * h; }
    double center_x() const { return x + 0.5 * w; }
    double center_y() const { return y + 0.5 * h; }
    bool contains(double px, double py) const { return px >= x && px <= x + w && py >= y && py <= y + h; }
};

struct DetectionFrame {
    double time_ms = 0.0;
    double gaze_x = 0.0;
    double gaze_y = 0.0;
    std::vector<DetectionBox> boxes;

    void validate() const;
};

}  // namespace graspfuse
