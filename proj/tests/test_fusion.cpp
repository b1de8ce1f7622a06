#include <doctest.h>

#include <random>

#include "graspfuse/fusion.hpp"
#include "oracles.hpp"

using namespace graspfuse;
using namespace graspfuse::fusion;

namespace {

ClassPosterior grasp(std::vector<double> p) {
    p.resize(kGraspLabels, 0.0);
    return ClassPosterior(std::move(p), 1);
}

ClassPosterior random_grasp(std::mt19937_64& rng) { return ClassPosterior(oracle::random_simplex(rng, kGraspLabels), 1); }

}  // namespace

TEST_CASE("restrict_rest") {
    std::vector<double> p(kEmgClasses, 0.0);
    p[0] = 0.5;
    p[3] = 0.5;
    CHECK(restrict_rest(ClassPosterior(p, 0)) == ClassPosterior::one_hot(kGraspLabels, 1, 3));
    const auto u = restrict_rest(ClassPosterior::uniform(kEmgClasses, 0));
    for (double v : u.probs()) CHECK(v == doctest::Approx(1.0 / 13));
    CHECK(restrict_rest(ClassPosterior::one_hot(kEmgClasses, 0, 0)) == ClassPosterior::uniform(kGraspLabels, 1));
    CHECK_THROWS_AS(restrict_rest(ClassPosterior::uniform(kGraspLabels, 1)), Error);

    PosteriorStream s{PosteriorStream::Source::Emg, {32.0, 64.0}, {ClassPosterior(p, 0), ClassPosterior(p, 0)}};
    const auto r = restrict_stream(s);
    CHECK(r.times_ms == s.times_ms);
    CHECK(r.posteriors[1].first_label() == 1);
}

TEST_CASE("worked product example") {
    const auto d = fuse(grasp({0.5, 0.3, 0.2}), grasp({0.1, 0.6, 0.3}), 1e-6, 42.0);
    CHECK(d.decision == 2);
    CHECK(d.time_ms == 42.0);
    // products .05, .18, .06 normalized
    CHECK(d.posterior.prob(2) == doctest::Approx(0.18 / 0.29).epsilon(1e-5));
    CHECK(d.posterior.prob(1) == doctest::Approx(0.05 / 0.29).epsilon(1e-5));
}

TEST_CASE("uniform vision leaves the EMG decision alone") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 500; ++i) {
        const auto p = random_grasp(rng);
        CHECK(fuse(p, ClassPosterior::uniform(kGraspLabels, 1)).decision == p.argmax_label());
    }
}

TEST_CASE("product-rule properties on random pairs") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    std::uniform_int_distribution<int> lab(1, kGraspLabels);
    for (int i = 0; i < 1000; ++i) {
        const auto p = random_grasp(rng);
        const auto q = random_grasp(rng);
        const auto d = fuse(p, q);
        CHECK(d.decision == oracle::product_argmax(p.probs(), q.probs(), 1e-6));
        CHECK(fuse(q, p).decision == d.decision);
        CHECK(fuse(q, p).posterior.probs() == d.posterior.probs());
        double sum = 0.0;
        for (double v : d.posterior.probs()) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

        // scaled inputs are not distributions, so build them by hand
        std::vector<double> ps = p.probs();
        const double k = scale(rng);
        for (auto& v : ps) v *= k;
        CHECK(fuse(ClassPosterior(ps, 1), q).decision == d.decision);

        const int l = lab(rng);
        CHECK(fuse(p, ClassPosterior::one_hot(kGraspLabels, 1, l)).decision == l);
    }
}

TEST_CASE("epsilon keeps a zero from vetoing") {
    const auto a = grasp({0.0, 0.9, 0.1});
    const auto b = grasp({0.98, 0.0, 0.02});
    CHECK(fuse(a, b, 1e-6).decision == 3);
    CHECK(fuse(a, b, 0.05).decision == 1);
    CHECK(fuse(grasp({1.0}), grasp({0.0, 1.0}), 0.0).posterior == ClassPosterior::uniform(kGraspLabels, 1));
    CHECK_THROWS_AS(fuse(a, b, -1.0), Error);
    CHECK_THROWS_AS(fuse(ClassPosterior::uniform(kEmgClasses, 0), b), Error);
}

TEST_CASE("stream fusion requires matching clocks") {
    PosteriorStream e{PosteriorStream::Source::Emg, {32.0, 64.0}, {grasp({1.0}), grasp({0.0, 1.0})}};
    PosteriorStream v{PosteriorStream::Source::Vision, {32.0, 64.0}, {grasp({0.5, 0.5}), grasp({0.5, 0.5})}};
    const auto f = fuse_streams(e, v);
    REQUIRE(f.size() == 2);
    CHECK(f[0].decision == 1);
    CHECK(f[1].decision == 2);
    CHECK(f[1].time_ms == 64.0);
    v.times_ms[1] = 65.0;
    CHECK_THROWS_AS(fuse_streams(e, v), Error);
    v.times_ms.pop_back();
    v.posteriors.pop_back();
    CHECK_THROWS_AS(fuse_streams(e, v), Error);

    const auto s = to_stream(f);
    CHECK(s.source == PosteriorStream::Source::Fused);
    CHECK(s.times_ms == std::vector<double>{32.0, 64.0});
}

TEST_CASE("smoothing") {
    auto decision = [](double t, const ClassPosterior& p) { return FusedDecision{t, p, p.argmax_label()}; };
    const auto a = grasp({0.6, 0.3, 0.1});
    const auto outlier = grasp({0.0, 0.1, 0.9});
    std::vector<FusedDecision> s;
    for (int i = 0; i < 4; ++i) s.push_back(decision(32.0 * i, a));
    s.push_back(decision(128.0, outlier));

    const auto m = smooth(s, 5);
    // (4 * 0.6 + 0) / 5 = 0.48 against (4 * 0.1 + 0.9) / 5 = 0.26
    CHECK(m[4].decision == 1);
    CHECK(m[4].posterior.prob(1) == doctest::Approx(0.48));
    CHECK(m[4].posterior.prob(3) == doctest::Approx(0.26));
    CHECK(m[0].posterior == a);
    CHECK(m[1].posterior.prob(1) == doctest::Approx(0.6));

    const auto id = smooth(s, 1);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(id[i].posterior == s[i].posterior);
    std::vector<FusedDecision> flat(6, decision(0.0, a));
    for (int i = 0; i < 6; ++i) flat[i].time_ms = i;
    for (const auto& d : smooth(flat, 5)) {
        for (int l = 1; l <= kGraspLabels; ++l) CHECK(d.posterior.prob(l) == doctest::Approx(a.prob(l)));
    }
    CHECK_THROWS_AS(smooth(s, 0), Error);
}

TEST_CASE("motion onset") {
    const std::vector<double> rest(12, 0.5);
    std::vector<double> g(12, 0.1);
    CHECK(!motion_onset(g, rest).has_value());
    for (int i = 7; i < 12; ++i) g[i] = 0.6;
    CHECK(motion_onset(g, rest) == 7u);
    g[3] = 0.5;  // equal is not a crossing
    CHECK(motion_onset(g, rest) == 7u);
    CHECK_THROWS_AS(motion_onset(std::vector<double>(3), rest), Error);
}
