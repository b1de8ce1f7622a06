#include "graspfuse/gazevision.hpp"

#include <algorithm>
#include <cmath>

namespace graspfuse::gazevision {

std::optional<std::size_t> select_box_index(const DetectionFrame& frame) {
    frame.validate();
    if (frame.boxes.empty()) return std::nullopt;

    std::optional<std::size_t> best;
    bool best_contains = false;
    double best_dist = 0.0;
    for (std::size_t i = 0; i < frame.boxes.size(); ++i) {
        const auto& b = frame.boxes[i];
        const bool inside = b.contains(frame.gaze_x, frame.gaze_y);
        const double dist = std::hypot(b.center_x() - frame.gaze_x, b.center_y() - frame.gaze_y);
        if (!best) {
            best = i;
            best_contains = inside;
            best_dist = dist;
            continue;
        }
        const auto& cur = frame.boxes[*best];
        bool better = false;
        if (inside != best_contains) {
            better = inside;
        } else if (inside) {
            better = b.area() < cur.area();
        } else if (dist != best_dist) {
            better = dist < best_dist;
        } else {
            better = b.area() < cur.area();
        }
        if (better) {
            best = i;
            best_contains = inside;
            best_dist = dist;
        }
    }
    return best;
}

std::optional<ClassPosterior> select_box(const DetectionFrame& frame) {
    const auto idx = select_box_index(frame);
    if (!idx) return std::nullopt;
    return frame.boxes[*idx].probs;
}

PosteriorStream resample_vision(const std::vector<DetectionFrame>& frames, const std::vector<double>& window_times_ms) {
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (!(frames[i].time_ms > frames[i - 1].time_ms)) fail("resample_vision: frames are not time-sorted");
    }
    std::vector<std::optional<ClassPosterior>> selected;
    selected.reserve(frames.size());
    for (const auto& f : frames) selected.push_back(select_box(f));

    const auto uniform = ClassPosterior::uniform(kGraspLabels, 1);
    PosteriorStream out;
    out.source = PosteriorStream::Source::Vision;
    out.times_ms = window_times_ms;
    out.posteriors.reserve(window_times_ms.size());
    for (double t : window_times_ms) {
        // first frame strictly after t
        const auto it = std::upper_bound(frames.begin(), frames.end(), t,
                                         [](double time, const DetectionFrame& f) { return time < f.time_ms; });
        const auto next = static_cast<std::size_t>(it - frames.begin());
        if (next == 0 || !selected[next - 1]) {
            out.posteriors.push_back(uniform);
        } else {
            out.posteriors.push_back(*selected[next - 1]);
        }
    }
    return out;
}

}  // namespace graspfuse::gazevision
