#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "graspfuse/eval.hpp"
#include "graspfuse/gazevision.hpp"
#include "graspfuse/ggs.hpp"
#include "graspfuse/signal.hpp"
#include "graspfuse/synth.hpp"

using namespace graspfuse;
using namespace graspfuse::synth;

namespace {

bool recovered(const std::vector<int>& got, const std::vector<int>& planted, int tol = 2) {
    if (got.size() != planted.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (std::abs(got[i] - planted[i]) > tol) return false;
    }
    return true;
}

double recovery_rate(const ScenarioSpec& spec, int trials) {
    const auto mvc = signal::compute_mvc(gen_mvc_trial(spec, 1));
    int hits = 0;
    for (int i = 0; i < trials; ++i) {
        const auto p = gen_trial(spec, 1, 1 + i % spec.n_objects, 1 + i / spec.n_objects);
        const auto env = signal::preprocess(p.trial, mvc);
        const Matrix blocks = signal::downsample_blocks(env.values, 50, p.trial.lead_in_samples);
        hits += recovered(ggs::ggs_fit(blocks, {}).breakpoints, p.planted.breakpoints);
    }
    return static_cast<double>(hits) / trials;
}

std::vector<double> decision_times(const annotate::TrialTimeline& tl) {
    std::vector<double> t;
    for (double ms = 320.0; ms <= tl.ms(tl.end); ms += 32.0) t.push_back(ms);
    return t;
}

}  // namespace

TEST_CASE("default scenario shape") {
    const auto spec = default_scenario();
    CHECK(spec.n_subjects == 2);
    CHECK(spec.n_objects == 13);
    CHECK(spec.trials_per_object == 6);
    CHECK(spec.vision_confusion[static_cast<int>(Phase::Grasp)] == 0.9);
    CHECK(spec.emg_rest_degradation);
    for (int o = 1; o <= 13; ++o) CHECK(spec.label_of(o) == o);
    CHECK(subject_name(2) == "s02");
    CHECK(object_name(11) == "o11");
}

TEST_CASE("trials are deterministic and valid") {
    const auto spec = default_scenario();
    const auto a = gen_trial(spec, 2, 5, 3);
    const auto b = gen_trial(spec, 2, 5, 3);
    const auto c = gen_trial(spec, 2, 5, 4);
    CHECK(a.trial.samples == b.trial.samples);
    CHECK(a.planted.breakpoints == b.planted.breakpoints);
    CHECK(!(a.trial.samples == c.trial.samples));
    CHECK_NOTHROW(a.trial.validate());
    CHECK(a.trial.trial_id() == "s02_o05_cw_t3");
    CHECK(a.trial.grasp_label == 5);
    CHECK(a.trial.lead_in_samples == 1600);
    CHECK_THROWS_AS(gen_trial(spec, 3, 1, 1), Error);
    CHECK_THROWS_AS(gen_trial(spec, 1, 14, 1), Error);
    CHECK_THROWS_AS(gen_trial(spec, 1, 1, 7), Error);
    // samples are stored as float32 in trial files; generation already rounds
    for (int i = 0; i < 200; ++i) {
        const double v = a.trial.samples(i % kChannels, i * 31);
        CHECK(static_cast<double>(static_cast<float>(v)) == v);
    }
}

TEST_CASE("a 4 s cadence within the duration jitter") {
    const auto spec = default_scenario();
    for (int o = 1; o <= 13; ++o) {
        const auto p = gen_trial(spec, 1, o, 1);
        const auto& tl = p.timeline;
        const double body_ms = tl.ms(tl.end) - tl.ms(tl.reach_start);
        CHECK(body_ms >= 3600.0 - 1e-9);
        CHECK(body_ms <= 4400.0 + 1e-9);
        CHECK(p.trial.length() == tl.end);
        CHECK(p.planted.length * 50 + p.trial.lead_in_samples == p.trial.length());
        CHECK(tl.phase_of_sample(tl.grasp_start) == Phase::Grasp);
        CHECK(p.block_envelope.size() == static_cast<std::size_t>(p.trial.length() / 50));
    }
}

TEST_CASE("block envelopes average to the scenario means") {
    const auto spec = default_scenario();
    const int label = 6;
    const auto& means = spec.means_for(label);
    const int n = 6 * spec.n_subjects;
    for (int ph = 0; ph < 4; ++ph) {
        for (int c = 0; c < kChannels; c += 3) {
            std::vector<double> per_trial;
            for (int s = 1; s <= spec.n_subjects; ++s) {
                for (int t = 1; t <= 6; ++t) {
                    const auto p = gen_trial(spec, s, label, t);
                    const int lead = p.trial.lead_in_samples / 50;
                    std::array<int, 5> edges{lead, lead + p.planted.breakpoints[0], lead + p.planted.breakpoints[1],
                                             lead + p.planted.breakpoints[2], lead + p.planted.length};
                    double sum = 0.0;
                    for (int b = edges[ph]; b < edges[ph + 1]; ++b) sum += p.block_envelope[b][c];
                    per_trial.push_back(sum / (edges[ph + 1] - edges[ph]));
                }
            }
            double mean = 0.0, var = 0.0;
            for (double v : per_trial) mean += v / n;
            for (double v : per_trial) var += (v - mean) * (v - mean) / (n - 1);
            const double se = std::max(std::sqrt(var / n), 1e-4);
            CHECK_MESSAGE(std::abs(mean - means[ph][c]) <= 3.0 * se, "phase ", ph, " channel ", c);
        }
    }
}

TEST_CASE("segmentation finds planted phases, and nothing once the means coincide") {
    auto spec = default_scenario();
    CHECK(recovery_rate(spec, 26) >= 0.9);

    // collapse every phase mean, including the per-trial phase offsets
    spec.separation = 0.0;
    spec.trial_sd = {0.0, 0.0, 0.0, 0.0};
    const double flat = recovery_rate(spec, 26);

    // random breakpoints with the same minimum segment length
    std::mt19937_64 rng(5);
    int hits = 0;
    const int draws = 200;
    for (int i = 0; i < draws; ++i) {
        const auto p = gen_trial(spec, 1 + i % 2, 1 + (i / 2) % 13, 1 + (i / 26) % 6);
        std::uniform_int_distribution<int> u(10, p.planted.length - 10);
        std::vector<int> b;
        do {
            b = {u(rng), u(rng), u(rng)};
            std::sort(b.begin(), b.end());
        } while (b[1] - b[0] < 10 || b[2] - b[1] < 10);
        hits += recovered(b, p.planted.breakpoints);
    }
    CHECK(flat <= 0.1);
    CHECK(static_cast<double>(hits) / draws <= 0.1);
}

TEST_CASE("vision streams") {
    const auto spec = default_scenario();
    const auto p = gen_trial(spec, 1, 9, 2);
    const auto times = decision_times(p.timeline);

    SUBCASE("deterministic for a seed") {
        const auto a = gen_vision_stream(9, p.timeline, spec.vision_confusion, 44);
        const auto b = gen_vision_stream(9, p.timeline, spec.vision_confusion, 44);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].gaze_x == b[i].gaze_x);
            CHECK(a[i].boxes.size() == b[i].boxes.size());
            CHECK(a[i].boxes[0].probs == b[i].boxes[0].probs);
        }
        CHECK(a.size() == static_cast<std::size_t>(std::ceil(p.timeline.ms(p.timeline.end) * 60.0 / 1000.0)));
        for (const auto& f : a) CHECK_NOTHROW(f.validate());
    }
    SUBCASE("no confusion means perfect vision") {
        const auto frames = gen_vision_stream(9, p.timeline, {0, 0, 0, 0}, 3);
        const auto s = gazevision::resample_vision(frames, times);
        for (const auto& post : s.posteriors) CHECK(post.argmax_label() == 9);
    }
    SUBCASE("full confusion during grasp drops grasp accuracy to chance or below") {
        long hits = 0, total = 0;
        for (int t = 1; t <= 6; ++t) {
            const auto q = gen_trial(spec, 1, 9, t);
            const auto frames = gen_vision_stream(9, q.timeline, {0.0, 1.0, 0.0, 0.0}, 100 + t);
            const eval::EvalTrial et{gazevision::resample_vision(frames, decision_times(q.timeline)), q.timeline, 9};
            const auto acc = eval::phase_accuracy({et});
            const auto g = static_cast<std::size_t>(eval::TablePhase::Grasp);
            hits += acc.correct[g];
            total += acc.count[g];
            CHECK(acc.accuracy(eval::TablePhase::Reach) > 0.9);
        }
        const double p13 = 1.0 / 13;
        CHECK(static_cast<double>(hits) / total <= p13 + 3.0 * std::sqrt(p13 * (1 - p13) / total));
    }
    CHECK_THROWS_AS(gen_vision_stream(0, p.timeline, spec.vision_confusion, 1), Error);
    CHECK_THROWS_AS(gen_vision_stream(3, p.timeline, {0.1, 1.2, 0.0, 0.0}, 1), Error);
}

TEST_CASE("mvc trials burst every channel") {
    const auto spec = default_scenario();
    const auto t = gen_mvc_trial(spec, 1);
    CHECK(t.is_mvc);
    CHECK(t.trial_id() == "s01_mvc");
    const auto mvc = signal::compute_mvc(t);
    for (int c = 0; c < kChannels; ++c) CHECK(mvc.mvc_value[c] > 0.0);
}

TEST_CASE("scenario json round trip and validation") {
    auto spec = default_scenario(9);
    spec.vision_confusion = {0.2, 0.8, 0.3, 0.05};
    spec.envelope_cv = {0.1, 0.2, 0.1, 0.01};
    const auto j = scenario_to_json(spec);
    const auto back = scenario_from_json(j);
    CHECK(back.seed == 9);
    CHECK(back.vision_confusion == spec.vision_confusion);
    CHECK(back.envelope_cv == spec.envelope_cv);
    CHECK(back.means_for(4) == spec.means_for(4));
    CHECK(gen_trial(back, 1, 2, 3).trial.samples == gen_trial(spec, 1, 2, 3).trial.samples);

    auto partial = scenario_from_json(nlohmann::ordered_json{{"n_objects", 3}, {"envelope_cv", 0.05}});
    CHECK(partial.n_objects == 3);
    CHECK(partial.envelope_cv[2] == 0.05);
    CHECK(partial.means.size() == 3);

    CHECK_THROWS_AS(scenario_from_json(nlohmann::ordered_json{{"vision_confusion", {{"grasp", 1.5}}}}), Error);
    CHECK_THROWS_AS(scenario_from_json(nlohmann::ordered_json{{"durations_ms", {{"reach", {0, 10}}}}}), Error);
    CHECK_THROWS_AS(scenario_from_json(nlohmann::ordered_json{{"n_subjects", "two"}}), Error);
}
