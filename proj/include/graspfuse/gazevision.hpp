#pragma once

#include <optional>
#include <vector>

#include "graspfuse/common.hpp"
#include "graspfuse/trial.hpp"

namespace graspfuse::gazevision {

/// Index of the box the user is looking at: the smallest box containing the
/// gaze if any, otherwise the box whose center is nearest the gaze. Ties go
/// to the smaller area, then the lower index.
std::optional<std::size_t> select_box_index(const DetectionFrame& frame);

/// Posterior of the selected box, or nothing when the frame has no boxes.
std::optional<ClassPosterior> select_box(const DetectionFrame& frame);

/// Zero-order hold of per-frame selections onto `window_times_ms`: each time
/// takes the latest frame at or before it. Times before the first frame, and
/// frames without boxes, yield the uniform distribution over labels 1..13.
PosteriorStream resample_vision(const std::vector<DetectionFrame>& frames, const std::vector<double>& window_times_ms);

}  // namespace graspfuse::gazevision
