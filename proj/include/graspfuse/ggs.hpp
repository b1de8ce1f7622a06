#pragma once

#include <vector>

#include "graspfuse/common.hpp"

namespace graspfuse::ggs {

/// Breakpoints b_1 < ... < b_K split [0, length) into K+1 segments
/// [0, b_1), [b_1, b_2), ..., [b_K, length).
struct Segmentation {
    std::vector<int> breakpoints;
    double objective = 0.0;
    int length = 0;
};

struct SegmentModel {
    Vector mean;
    Matrix covariance;  // empirical (divide by m), unregularized
    int length = 0;
    double loglik = 0.0;
};

struct GgsConfig {
    int k = 3;
    double lambda = 0.1;
    int min_seg_len = 10;
    int max_sweeps = 50;
};

/// Objective value after the initial fit and after every insertion and every
/// breakpoint move, in order.
struct GgsTrace {
    std::vector<double> objectives;
    int sweeps = 0;
};

/// Regularized Gaussian log-likelihood of a C x m segment:
///   -(m/2) * (C log(2 pi) + log det(S) + C),  S = Sigma_hat + lambda I,
/// the penalized maximum of the segment likelihood with penalty
/// (m lambda / 2) tr(Sigma^-1). With lambda = 0 it is the plain maximum
/// likelihood. Throws if m < 2 or S is singular.
double segment_loglik(const Matrix& series, double lambda);

SegmentModel fit_segment(const Matrix& series, double lambda);

/// Sum of segment_loglik over the segments induced by `breakpoints`.
double segmentation_objective(const Matrix& series, const std::vector<int>& breakpoints, double lambda);

/// Greedy insertion of K breakpoints, each followed by adjustment sweeps
/// that re-place every breakpoint optimally between its neighbours until a
/// sweep moves nothing (or max_sweeps is reached). Moves happen only on a
/// strict objective gain; ties resolve to the smallest index.
Segmentation ggs_fit(const Matrix& series, const GgsConfig& cfg, GgsTrace* trace = nullptr);

struct PhaseInterval {
    Phase phase;
    int begin;
    int end;  // exclusive
};

/// Maps the four segments of a 3-breakpoint segmentation to reach, grasp,
/// return and rest.
std::vector<PhaseInterval> label_segments(const Segmentation& seg);

}  // namespace graspfuse::ggs
