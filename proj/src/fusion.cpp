#include "graspfuse/fusion.hpp"

#include <cmath>

namespace graspfuse::fusion {

namespace {

std::vector<double> normalized(const ClassPosterior& p, const char* what) {
    if (p.size() != kGraspLabels || p.first_label() != 1) {
        fail(std::string("fuse: ") + what + " posterior must cover grasp labels 1..13");
    }
    double sum = 0.0;
    for (double v : p.probs()) {
        if (!std::isfinite(v) || v < 0.0) fail(std::string("fuse: ") + what + " posterior has a non-finite or negative entry");
        sum += v;
    }
    if (!(sum > 0.0)) fail(std::string("fuse: ") + what + " posterior has no mass");
    std::vector<double> out(p.probs());
    for (auto& v : out) v /= sum;
    return out;
}

int argmax_label(const std::vector<double>& q) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.size(); ++i) {
        if (q[i] > q[best]) best = i;
    }
    return static_cast<int>(best) + 1;
}

}  // namespace

ClassPosterior restrict_rest(const ClassPosterior& p_emg) {
    if (p_emg.size() != kEmgClasses || p_emg.first_label() != 0) {
        fail("restrict_rest: expected a 14-label posterior over 0..13");
    }
    std::vector<double> grasp(p_emg.probs().begin() + 1, p_emg.probs().end());
    double mass = 0.0;
    for (double v : grasp) mass += v;
    if (!(mass > 0.0)) return ClassPosterior::uniform(kGraspLabels, 1);
    for (auto& v : grasp) v /= mass;
    return ClassPosterior(std::move(grasp), 1);
}

PosteriorStream restrict_stream(const PosteriorStream& emg) {
    PosteriorStream out;
    out.source = emg.source;
    out.times_ms = emg.times_ms;
    out.posteriors.reserve(emg.size());
    for (const auto& p : emg.posteriors) out.posteriors.push_back(restrict_rest(p));
    return out;
}

FusedDecision fuse(const ClassPosterior& p_emg, const ClassPosterior& p_vision, double eps, double time_ms) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) fail("fuse: eps must be finite and non-negative");
    const auto e = normalized(p_emg, "EMG");
    const auto v = normalized(p_vision, "vision");
    std::vector<double> q(kGraspLabels);
    double sum = 0.0;
    for (std::size_t l = 0; l < q.size(); ++l) {
        q[l] = std::max(e[l], eps) * std::max(v[l], eps);
        sum += q[l];
    }
    if (!(sum > 0.0)) {
        // eps = 0 and disjoint supports: nothing to prefer
        return FusedDecision{time_ms, ClassPosterior::uniform(kGraspLabels, 1), 1};
    }
    for (auto& x : q) x /= sum;
    const int decision = argmax_label(q);
    return FusedDecision{time_ms, ClassPosterior(std::move(q), 1), decision};
}

std::vector<FusedDecision> fuse_streams(const PosteriorStream& emg13, const PosteriorStream& vision, double eps) {
    if (emg13.size() != vision.size()) fail("fuse_streams: streams differ in length");
    std::vector<FusedDecision> out;
    out.reserve(emg13.size());
    for (std::size_t i = 0; i < emg13.size(); ++i) {
        if (emg13.times_ms[i] != vision.times_ms[i]) fail("fuse_streams: streams are sampled at different times");
        out.push_back(fuse(emg13.posteriors[i], vision.posteriors[i], eps, emg13.times_ms[i]));
    }
    return out;
}

std::vector<FusedDecision> smooth(const std::vector<FusedDecision>& stream, int n) {
    if (n < 1) fail("smooth: window must be at least 1");
    for (std::size_t i = 1; i < stream.size(); ++i) {
        if (!(stream[i].time_ms > stream[i - 1].time_ms)) fail("smooth: stream is not time-sorted");
    }
    std::vector<FusedDecision> out;
    out.reserve(stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const std::size_t first = i + 1 >= static_cast<std::size_t>(n) ? i + 1 - static_cast<std::size_t>(n) : 0;
        const auto& ref = stream[i].posterior;
        std::vector<double> mean(ref.size(), 0.0);
        for (std::size_t j = first; j <= i; ++j) {
            const auto& p = stream[j].posterior.probs();
            for (std::size_t l = 0; l < mean.size(); ++l) mean[l] += p[l];
        }
        const double count = static_cast<double>(i - first + 1);
        for (auto& v : mean) v /= count;
        ClassPosterior posterior(std::move(mean), ref.first_label());
        const int decision = posterior.argmax_label();
        out.push_back(FusedDecision{stream[i].time_ms, std::move(posterior), decision});
    }
    return out;
}

PosteriorStream to_stream(const std::vector<FusedDecision>& decisions) {
    PosteriorStream out;
    out.source = PosteriorStream::Source::Fused;
    for (const auto& d : decisions) {
        out.times_ms.push_back(d.time_ms);
        out.posteriors.push_back(d.posterior);
    }
    return out;
}

std::optional<std::size_t> motion_onset(std::span<const double> p_grasp, std::span<const double> p_rest) {
    if (p_grasp.size() != p_rest.size()) fail("motion_onset: curves differ in length");
    for (std::size_t i = 0; i < p_grasp.size(); ++i) {
        if (p_grasp[i] > p_rest[i]) return i;
    }
    return std::nullopt;
}

}  // namespace graspfuse::fusion
