#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "graspfuse/annotate.hpp"
#include "graspfuse/common.hpp"

namespace graspfuse::eval {

/// One evaluated trial: a posterior stream on the trial's own clock plus the
/// phase timeline it is judged against.
struct EvalTrial {
    PosteriorStream stream;
    annotate::TrialTimeline timeline;
    int grasp_label = 1;
};

/// Sample index of the final sample feeding a decision at `time_ms`.
int decision_sample(double time_ms, double sample_rate_hz);

/// Truth at a decision: for streams covering label 0 it follows the phase
/// (rest -> 0); for grasp-only streams it is always the trial's grasp label.
int truth_label(const EvalTrial& trial, std::size_t index);

/// Shifts times so grasp onset is 0 ms and keeps decisions at or after
/// -(reach duration + pre_rest_ms).
PosteriorStream align_trial(const PosteriorStream& stream, const annotate::TrialTimeline& timeline,
                            double pre_rest_ms = 700.0);

struct AlignedTrial {
    PosteriorStream stream;  // aligned times
    std::vector<int> truth;
    int grasp_label = 1;
};

AlignedTrial align_for_eval(const EvalTrial& trial, double pre_rest_ms = 700.0);

struct CurvePoint {
    double time_ms = 0.0;
    int coverage = 0;
    double accuracy = 0.0;
    double p_true = 0.0;  // executed grasp label
    double p_rest = 0.0;  // NaN for grasp-only streams
    double p_top_competitor = 0.0;
};

/// Averages over the trials covering each hop-grid bin of aligned time.
std::vector<CurvePoint> accuracy_curve(const std::vector<AlignedTrial>& trials, double hop_ms = 32.0);

/// Highest probability among labels other than the grasp label and rest.
double top_competitor(const ClassPosterior& p, int grasp_label);

enum class TablePhase { RestBefore = 0, Reach, Grasp, Return, RestAfter };
inline constexpr std::array<TablePhase, 5> kTablePhases{TablePhase::RestBefore, TablePhase::Reach, TablePhase::Grasp,
                                                       TablePhase::Return, TablePhase::RestAfter};
std::string_view table_phase_name(TablePhase p);

TablePhase table_phase(const annotate::TrialTimeline& timeline, int sample);

struct PhaseAccuracy {
    std::array<long, 5> correct{};
    std::array<long, 5> count{};

    /// NaN when the phase has no windows.
    double accuracy(TablePhase p) const;
    long total_count() const;
    double total() const;  // window-weighted over all phases
};

PhaseAccuracy phase_accuracy(const std::vector<EvalTrial>& trials);

struct PhaseTableRow {
    std::string source;
    PhaseAccuracy accuracy;
};

/// One row per evidence source, in the order given.
std::vector<PhaseTableRow> per_phase_table(const std::vector<std::pair<std::string, std::vector<EvalTrial>>>& sources);

struct OnsetResult {
    std::optional<double> onset_ms;  // decision time of the first crossing
    bool within_reach = false;
};

/// First decision where P(grasp label) > P(rest) on a 14-label stream.
OnsetResult onset_for_trial(const EvalTrial& trial);

/// Mean aligned phase boundaries across trials (ms relative to grasp onset).
struct MeanBoundaries {
    double reach = 0.0;
    double grasp = 0.0;
    double ret = 0.0;
    double rest = 0.0;
};

MeanBoundaries mean_boundaries(const std::vector<annotate::TrialTimeline>& timelines);

struct PlotSeries {
    std::string name;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    double y_min = 0.0;
    double y_max = 1.0;
    std::vector<PlotSeries> series;
    std::vector<std::pair<double, std::string>> markers;  // vertical dashed lines
};

std::string line_plot_svg(const PlotSpec& spec);

}  // namespace graspfuse::eval
