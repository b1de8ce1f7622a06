#pragma once

#include <optional>
#include <span>
#include <vector>

#include "graspfuse/common.hpp"

namespace graspfuse::fusion {

struct FusedDecision {
    double time_ms = 0.0;
    ClassPosterior posterior;  // labels 1..13
    int decision = 1;          // argmax of posterior
};

/// Drops the rest label from a 14-label EMG posterior and renormalizes;
/// uniform over 1..13 when no grasp mass is left.
ClassPosterior restrict_rest(const ClassPosterior& p_emg);

PosteriorStream restrict_stream(const PosteriorStream& emg);

/// Product rule over labels 1..13: q_l ~ max(p_l, eps) * max(v_l, eps) with
/// both inputs first normalized to unit mass. The decision is the argmax,
/// ties to the lowest label.
FusedDecision fuse(const ClassPosterior& p_emg, const ClassPosterior& p_vision, double eps = 1e-6,
                   double time_ms = 0.0);

/// Fuses two streams sampled at identical times.
std::vector<FusedDecision> fuse_streams(const PosteriorStream& emg13, const PosteriorStream& vision,
                                        double eps = 1e-6);

/// Causal moving average of the last min(n, available) posteriors.
std::vector<FusedDecision> smooth(const std::vector<FusedDecision>& stream, int n = 5);

PosteriorStream to_stream(const std::vector<FusedDecision>& decisions);

/// First index where p_grasp > p_rest, if any.
std::optional<std::size_t> motion_onset(std::span<const double> p_grasp, std::span<const double> p_rest);

}  // namespace graspfuse::fusion
