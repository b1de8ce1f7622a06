#include <doctest.h>

#include <algorithm>
#include <set>

#include "graspfuse/annotate.hpp"
#include "graspfuse/synth.hpp"

using namespace graspfuse;
using namespace graspfuse::annotate;

namespace {

const signal::WindowGeometry kGeom{500, 50};

TrialTimeline timeline(int reach, int grasp, int ret, int rest, int end) {
    TrialTimeline t;
    t.reach_start = reach;
    t.grasp_start = grasp;
    t.return_start = ret;
    t.rest_start = rest;
    t.end = end;
    return t;
}

std::vector<features::FeatureVector> blank(std::size_t n) { return std::vector<features::FeatureVector>(n); }

std::vector<TrialKey> keys(const std::string& subject, const std::string& object, int count) {
    std::vector<TrialKey> out;
    for (int i = 1; i <= count; ++i) {
        out.push_back({subject, object, i, subject + "_" + object + "_cw_t" + std::to_string(i)});
    }
    return out;
}

}  // namespace

TEST_CASE("timeline from a segmentation") {
    const auto t = TrialTimeline::from_segmentation(ggs::Segmentation{{10, 40, 60}, 0.0, 80}, 1600, 50, 6000,
                                                    kSampleRateHz);
    CHECK(t.reach_start == 1600);
    CHECK(t.grasp_start == 2100);
    CHECK(t.return_start == 3600);
    CHECK(t.rest_start == 4600);
    CHECK(t.phase_of_sample(1599) == Phase::Rest);
    CHECK(t.before_reach(1599));
    CHECK(t.phase_of_sample(1600) == Phase::Reach);
    CHECK(t.phase_of_sample(2100) == Phase::Grasp);
    CHECK(t.phase_of_sample(4599) == Phase::Return);
    CHECK(t.phase_of_sample(4600) == Phase::Rest);
    CHECK(t.ms(1600) == doctest::Approx(1024.0));
    CHECK_THROWS_AS(TrialTimeline::from_segmentation(ggs::Segmentation{{10, 40}, 0.0, 80}, 0, 50, 6000, kSampleRateHz),
                    Error);
    CHECK_THROWS_AS(TrialTimeline::from_segmentation(ggs::Segmentation{{10, 40, 60}, 0.0, 80}, 0, 50, 2000,
                                                     kSampleRateHz),
                    Error);
}

TEST_CASE("windows take the phase of their final sample") {
    // window i ends at sample 50 i + 499
    const auto t = timeline(600, 1000, 1500, 2000, 3000);
    const auto w = annotate_windows(blank(40), kGeom, t, 5);
    CHECK(w[2].final_sample == 599);
    CHECK(w[2].phase == Phase::Rest);
    CHECK(w[2].label == 0);
    CHECK(w[3].phase == Phase::Reach);
    CHECK(w[3].label == 5);
    CHECK(w[11].final_sample == 1049);
    CHECK(w[11].phase == Phase::Grasp);
    CHECK(w[11].label == 5);
    CHECK(w[30].phase == Phase::Return);
    CHECK(w[31].phase == Phase::Rest);
    CHECK(w[31].label == 0);
    CHECK(w[0].decision_time_ms == doctest::Approx(320.0));
    for (const auto& x : w) CHECK((x.phase == Phase::Rest) == (x.label == 0));
    CHECK_THROWS_AS(annotate_windows(blank(2), kGeom, t, 0), Error);
    CHECK_THROWS_AS(annotate_windows(blank(2), kGeom, t, 14), Error);
}

TEST_CASE("a window ending one sample into grasp is a grasp window") {
    const auto t = timeline(0, 549, 1500, 2000, 3000);
    const auto w = annotate_windows(blank(3), kGeom, t, 9);
    CHECK(w[0].phase == Phase::Reach);
    CHECK(w[1].final_sample == 549);
    CHECK(w[1].phase == Phase::Grasp);
    CHECK(w[1].label == 9);
}

TEST_CASE("training filter drops return windows only") {
    std::vector<LabeledWindow> w(40);
    for (int i = 0; i < 40; ++i) w[i].phase = static_cast<Phase>(i / 10);
    CHECK(training_filter(w).size() == 30);
    for (const auto& x : training_filter(w)) CHECK(x.phase != Phase::Return);
    CHECK(training_filter(w, SplitRole::Validation).size() == 40);
    std::vector<LabeledWindow> rest(7);
    CHECK(training_filter(rest).size() == 7);
}

TEST_CASE("splits are 4/2 partitions per subject and object") {
    std::vector<TrialKey> all;
    for (const char* s : {"s01", "s02"}) {
        for (const char* o : {"o01", "o02", "o03"}) {
            auto k = keys(s, o, 6);
            all.insert(all.end(), k.begin(), k.end());
        }
    }
    std::reverse(all.begin(), all.end());
    const auto split = split_trials(all, 17);
    REQUIRE(split.size() == 6);
    CHECK(split.front().subject_id == "s01");
    CHECK(split.front().object_id == "o01");
    for (const auto& g : split) {
        CHECK(g.train.size() == 4);
        CHECK(g.validation.size() == 2);
        std::set<std::string> u(g.train.begin(), g.train.end());
        u.insert(g.validation.begin(), g.validation.end());
        CHECK(u.size() == 6);
        for (const auto& id : u) CHECK(id.starts_with(g.subject_id + "_" + g.object_id));
    }

    // order of the input does not matter, the seed does
    std::reverse(all.begin(), all.end());
    const auto again = split_trials(all, 17);
    for (std::size_t i = 0; i < split.size(); ++i) CHECK(again[i].train == split[i].train);

    std::set<std::vector<std::string>> seen;
    for (std::uint64_t seed = 0; seed < 100; ++seed) seen.insert(split_trials(keys("s01", "o01", 6), seed)[0].validation);
    CHECK(seen.size() > 1);

    CHECK_THROWS_AS(split_trials(keys("s01", "o01", 5), 1), Error);
}

TEST_CASE("annotating a generated trial follows its planted schedule") {
    const auto spec = synth::default_scenario();
    const auto p = synth::gen_trial(spec, 1, 4, 2);
    const auto mvc = signal::compute_mvc(synth::gen_mvc_trial(spec, 1));
    const auto w = annotate_trial(p.trial, mvc, p.timeline);
    REQUIRE(!w.empty());
    for (const auto& x : w) {
        CHECK(x.phase == p.timeline.phase_of_sample(x.final_sample));
        CHECK(x.label == (x.phase == Phase::Rest ? 0 : 4));
    }
    // grasp windows carry more activation than pre-reach rest windows
    double rest_rms = 0.0, grasp_rms = 0.0;
    int nr = 0, ng = 0;
    for (const auto& x : w) {
        const double r = x.features.z[0] + x.features.z[5] + x.features.z[9];
        if (x.final_sample < p.timeline.reach_start) rest_rms += r, ++nr;
        if (x.phase == Phase::Grasp) grasp_rms += r, ++ng;
    }
    REQUIRE(nr > 0);
    REQUIRE(ng > 0);
    CHECK(grasp_rms / ng > 2.0 * rest_rms / nr);
}
