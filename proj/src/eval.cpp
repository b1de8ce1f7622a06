#include "graspfuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "graspfuse/fusion.hpp"

namespace graspfuse::eval {

int decision_sample(double time_ms, double sample_rate_hz) {
    return static_cast<int>(std::llround(time_ms * sample_rate_hz / 1000.0)) - 1;
}

int truth_label(const EvalTrial& trial, std::size_t index) {
    const auto& p = trial.stream.posteriors[index];
    if (!p.contains(kRestLabel)) return trial.grasp_label;
    const int s = decision_sample(trial.stream.times_ms[index], trial.timeline.sample_rate_hz);
    return trial.timeline.phase_of_sample(s) == Phase::Rest ? kRestLabel : trial.grasp_label;
}

PosteriorStream align_trial(const PosteriorStream& stream, const annotate::TrialTimeline& timeline,
                            double pre_rest_ms) {
    timeline.validate();
    const double grasp_ms = timeline.ms(timeline.grasp_start);
    const double earliest = -(timeline.ms(timeline.grasp_start) - timeline.ms(timeline.reach_start) + pre_rest_ms);
    PosteriorStream out;
    out.source = stream.source;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const double t = stream.times_ms[i] - grasp_ms;
        if (t < earliest - 1e-9) continue;
        out.times_ms.push_back(t);
        out.posteriors.push_back(stream.posteriors[i]);
    }
    return out;
}

AlignedTrial align_for_eval(const EvalTrial& trial, double pre_rest_ms) {
    AlignedTrial out;
    out.grasp_label = trial.grasp_label;
    out.stream = align_trial(trial.stream, trial.timeline, pre_rest_ms);
    const double grasp_ms = trial.timeline.ms(trial.timeline.grasp_start);
    // recover truth from the original clock
    std::size_t j = 0;
    for (double t : out.stream.times_ms) {
        while (std::abs(trial.stream.times_ms[j] - grasp_ms - t) > 1e-9) ++j;
        out.truth.push_back(truth_label(trial, j));
    }
    return out;
}

double top_competitor(const ClassPosterior& p, int grasp_label) {
    double best = 0.0;
    for (int l = p.first_label(); l <= p.last_label(); ++l) {
        if (l == grasp_label || l == kRestLabel) continue;
        best = std::max(best, p.prob(l));
    }
    return best;
}

std::vector<CurvePoint> accuracy_curve(const std::vector<AlignedTrial>& trials, double hop_ms) {
    if (trials.empty()) fail("accuracy_curve: no streams");
    if (!(hop_ms > 0.0)) fail("accuracy_curve: hop must be positive");
    struct Acc {
        int n = 0, rest_n = 0;
        double correct = 0, p_true = 0, p_rest = 0, p_top = 0;
    };
    std::map<long long, Acc> bins;
    for (const auto& trial : trials) {
        for (std::size_t i = 0; i < trial.stream.size(); ++i) {
            const auto& p = trial.stream.posteriors[i];
            auto& a = bins[std::llround(trial.stream.times_ms[i] / hop_ms)];
            ++a.n;
            a.correct += p.argmax_label() == trial.truth[i] ? 1.0 : 0.0;
            a.p_true += p.prob(trial.grasp_label);
            a.p_top += top_competitor(p, trial.grasp_label);
            if (p.contains(kRestLabel)) {
                a.p_rest += p.prob(kRestLabel);
                ++a.rest_n;
            }
        }
    }
    std::vector<CurvePoint> out;
    out.reserve(bins.size());
    for (const auto& [bin, a] : bins) {
        CurvePoint c;
        c.time_ms = static_cast<double>(bin) * hop_ms;
        c.coverage = a.n;
        c.accuracy = a.correct / a.n;
        c.p_true = a.p_true / a.n;
        c.p_top_competitor = a.p_top / a.n;
        c.p_rest = a.rest_n > 0 ? a.p_rest / a.rest_n : std::numeric_limits<double>::quiet_NaN();
        out.push_back(c);
    }
    return out;
}

std::string_view table_phase_name(TablePhase p) {
    switch (p) {
        case TablePhase::RestBefore: return "rest_before";
        case TablePhase::Reach: return "reach";
        case TablePhase::Grasp: return "grasp";
        case TablePhase::Return: return "return";
        case TablePhase::RestAfter: return "rest_after";
    }
    return "rest_after";
}

TablePhase table_phase(const annotate::TrialTimeline& timeline, int sample) {
    if (timeline.before_reach(sample)) return TablePhase::RestBefore;
    switch (timeline.phase_of_sample(sample)) {
        case Phase::Reach: return TablePhase::Reach;
        case Phase::Grasp: return TablePhase::Grasp;
        case Phase::Return: return TablePhase::Return;
        case Phase::Rest: return TablePhase::RestAfter;
    }
    return TablePhase::RestAfter;
}

double PhaseAccuracy::accuracy(TablePhase p) const {
    const auto i = static_cast<std::size_t>(p);
    if (count[i] == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(correct[i]) / static_cast<double>(count[i]);
}

long PhaseAccuracy::total_count() const {
    long n = 0;
    for (long c : count) n += c;
    return n;
}

double PhaseAccuracy::total() const {
    long hits = 0;
    for (long c : correct) hits += c;
    const long n = total_count();
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(hits) / static_cast<double>(n);
}

PhaseAccuracy phase_accuracy(const std::vector<EvalTrial>& trials) {
    PhaseAccuracy out;
    for (const auto& trial : trials) {
        trial.stream.validate();
        for (std::size_t i = 0; i < trial.stream.size(); ++i) {
            const int s = decision_sample(trial.stream.times_ms[i], trial.timeline.sample_rate_hz);
            const auto phase = static_cast<std::size_t>(table_phase(trial.timeline, s));
            ++out.count[phase];
            if (trial.stream.posteriors[i].argmax_label() == truth_label(trial, i)) ++out.correct[phase];
        }
    }
    return out;
}

std::vector<PhaseTableRow> per_phase_table(
    const std::vector<std::pair<std::string, std::vector<EvalTrial>>>& sources) {
    std::vector<PhaseTableRow> rows;
    for (const auto& [name, trials] : sources) rows.push_back({name, phase_accuracy(trials)});
    return rows;
}

OnsetResult onset_for_trial(const EvalTrial& trial) {
    std::vector<double> grasp, rest;
    for (const auto& p : trial.stream.posteriors) {
        if (!p.contains(kRestLabel)) fail("onset: stream must include the rest label");
        grasp.push_back(p.prob(trial.grasp_label));
        rest.push_back(p.prob(kRestLabel));
    }
    OnsetResult out;
    const auto idx = fusion::motion_onset(grasp, rest);
    if (!idx) return out;
    out.onset_ms = trial.stream.times_ms[*idx];
    const int s = decision_sample(*out.onset_ms, trial.timeline.sample_rate_hz);
    out.within_reach = table_phase(trial.timeline, s) == TablePhase::Reach;
    return out;
}

MeanBoundaries mean_boundaries(const std::vector<annotate::TrialTimeline>& timelines) {
    MeanBoundaries m;
    if (timelines.empty()) return m;
    for (const auto& t : timelines) {
        const double g = t.ms(t.grasp_start);
        m.reach += t.ms(t.reach_start) - g;
        m.ret += t.ms(t.return_start) - g;
        m.rest += t.ms(t.rest_start) - g;
    }
    const double n = static_cast<double>(timelines.size());
    m.reach /= n;
    m.ret /= n;
    m.rest /= n;
    return m;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::string line_plot_svg(const PlotSpec& spec) {
    constexpr double width = 720, height = 420, left = 70, right = 150, top = 40, bottom = 60;
    const double pw = width - left - right, ph = height - top - bottom;

    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    for (const auto& s : spec.series) {
        for (double x : s.x) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
        }
    }
    if (!std::isfinite(x_min)) {
        x_min = 0.0;
        x_max = 1.0;
    }
    if (x_max <= x_min) x_max = x_min + 1.0;
    const double y_span = spec.y_max > spec.y_min ? spec.y_max - spec.y_min : 1.0;
    auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - spec.y_min) / y_span) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << spec.title
      << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 5; ++i) {
        const double y = spec.y_min + y_span * i / 5.0;
        o << "<line x1=\"" << left - 4 << "\" x2=\"" << left << "\" y1=\"" << fmt(sy(y)) << "\" y2=\"" << fmt(sy(y))
          << "\" stroke=\"black\"/>";
        o << "<text x=\"" << left - 8 << "\" y=\"" << fmt(sy(y) + 4) << "\" text-anchor=\"end\">" << fmt(y)
          << "</text>\n";
    }
    for (int i = 0; i <= 6; ++i) {
        const double x = x_min + (x_max - x_min) * i / 6.0;
        o << "<text x=\"" << fmt(sx(x)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
          << std::lround(x) << "</text>\n";
    }
    o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">"
      << spec.x_label << "</text>\n";
    o << "<text transform=\"translate(18," << fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << spec.y_label << "</text>\n";

    for (const auto& [x, label] : spec.markers) {
        if (x < x_min || x > x_max) continue;
        o << "<line x1=\"" << fmt(sx(x)) << "\" x2=\"" << fmt(sx(x)) << "\" y1=\"" << top << "\" y2=\""
          << top + ph << "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>";
        o << "<text x=\"" << fmt(sx(x) + 3) << "\" y=\"" << top + 12 << "\" fill=\"gray\">" << label << "</text>\n";
    }

    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        const auto& series = spec.series[s];
        o << "<polyline fill=\"none\" stroke=\"" << series.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < series.x.size(); ++i) {
            if (!std::isfinite(series.y[i])) continue;
            o << fmt(sx(series.x[i])) << "," << fmt(sy(series.y[i])) << " ";
        }
        o << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(s);
        o << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 32 << "\" y1=\"" << fmt(ly) << "\" y2=\""
          << fmt(ly) << "\" stroke=\"" << series.color << "\" stroke-width=\"2\"/>";
        o << "<text x=\"" << left + pw + 36 << "\" y=\"" << fmt(ly + 4) << "\">" << series.name << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace graspfuse::eval
