#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "graspfuse/ggs.hpp"
#include "oracles.hpp"

using namespace graspfuse;
using namespace graspfuse::ggs;

namespace {

// Piecewise-constant means plus unit Gaussian noise.
Matrix planted(std::mt19937_64& rng, int channels, const std::vector<int>& lengths, double step) {
    int n = 0;
    for (int l : lengths) n += l;
    Matrix x(channels, n);
    std::normal_distribution<double> g;
    int col = 0;
    for (std::size_t s = 0; s < lengths.size(); ++s) {
        for (int i = 0; i < lengths[s]; ++i, ++col) {
            for (int c = 0; c < channels; ++c) x(c, col) = step * static_cast<double>((s + c) % 3) + g(rng);
        }
    }
    return x;
}

}  // namespace

TEST_CASE("segment log-likelihood") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    SUBCASE("standard normal approaches the entropy bound") {
        Matrix x(3, 200000);
        for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
        const double per_sample = segment_loglik(x, 0.0) / x.cols();
        CHECK(per_sample == doctest::Approx(-1.5 * std::log(2 * std::numbers::pi * std::numbers::e)).epsilon(1e-3));
    }
    SUBCASE("agrees with the oracle and doubles under duplication") {
        Matrix x(2, 40);
        for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
        CHECK(segment_loglik(x, 0.1) == doctest::Approx(oracle::segment_loglik(x, 0, 40, 0.1)).epsilon(1e-10));
        Matrix twice(2, 80);
        twice << x, x;
        CHECK(segment_loglik(twice, 0.0) == doctest::Approx(2.0 * segment_loglik(x, 0.0)).epsilon(1e-10));
    }
    SUBCASE("constant segments need regularization") {
        const Matrix c = Matrix::Constant(2, 30, 4.0);
        CHECK(std::isfinite(segment_loglik(c, 0.1)));
        CHECK_THROWS_AS(segment_loglik(c, 0.0), Error);
        CHECK_THROWS_AS(segment_loglik(Matrix::Zero(2, 1), 0.1), Error);
    }
    SUBCASE("fit_segment reports the empirical moments") {
        Matrix x(1, 4);
        x << 1, 2, 3, 6;
        const auto m = fit_segment(x, 0.0);
        CHECK(m.mean(0) == doctest::Approx(3.0));
        CHECK(m.covariance(0, 0) == doctest::Approx(3.5));
        CHECK(m.length == 4);
    }
}

TEST_CASE("K = 0 is the whole-series likelihood") {
    std::mt19937_64 rng(2);
    const Matrix x = planted(rng, 2, {30, 30}, 3.0);
    const auto s = ggs_fit(x, {0, 0.1, 5, 50});
    CHECK(s.breakpoints.empty());
    CHECK(s.objective == doctest::Approx(segment_loglik(x, 0.1)));
    CHECK(s.length == 60);
}

TEST_CASE("argument checks") {
    const Matrix x = Matrix::Random(2, 20);
    CHECK_THROWS_AS(ggs_fit(x, {3, 0.1, 10, 50}), Error);
    CHECK_THROWS_AS(ggs_fit(x, {1, 0.1, 1, 50}), Error);
    CHECK_THROWS_AS(ggs_fit(x, {1, -1.0, 5, 50}), Error);
    CHECK_THROWS_AS(segmentation_objective(x, {5, 5}, 0.1), Error);
}

TEST_CASE("small instances reach the exhaustive optimum and never beat it") {
    std::mt19937_64 rng(77);
    int equal = 0;
    const int runs = 40;
    for (int r = 0; r < runs; ++r) {
        std::uniform_int_distribution<int> len(8, 18);
        const int k = 1 + r % 2;
        std::vector<int> lengths;
        for (int s = 0; s <= k; ++s) lengths.push_back(len(rng));
        const Matrix x = planted(rng, 1 + r % 2, lengths, 1.5);
        GgsTrace trace;
        const auto s = ggs_fit(x, {k, 0.1, 3, 50}, &trace);
        const auto best = oracle::exhaustive_ggs(x, k, 3, 0.1);
        CHECK(s.objective <= best.objective + 1e-9 * std::abs(best.objective));
        if (std::abs(s.objective - best.objective) <= 1e-9 * std::abs(best.objective)) ++equal;
        for (std::size_t i = 1; i < trace.objectives.size(); ++i) {
            CHECK(trace.objectives[i] >= trace.objectives[i - 1] - 1e-9 * std::abs(trace.objectives[i - 1]));
        }
        CHECK(segmentation_objective(x, s.breakpoints, 0.1) == doctest::Approx(s.objective).epsilon(1e-6));
    }
    CHECK(equal >= runs * 9 / 10);
}

TEST_CASE("planted 12-channel breakpoints are recovered") {
    std::mt19937_64 rng(8);
    const Matrix x = planted(rng, kChannels, {30, 35, 30, 35}, 2.0);
    const auto s = ggs_fit(x, {3, 0.1, 10, 50});
    REQUIRE(s.breakpoints.size() == 3);
    CHECK(std::abs(s.breakpoints[0] - 30) <= 2);
    CHECK(std::abs(s.breakpoints[1] - 65) <= 2);
    CHECK(std::abs(s.breakpoints[2] - 95) <= 2);
}

TEST_CASE("channel order does not matter") {
    std::mt19937_64 rng(4);
    const Matrix x = planted(rng, 4, {25, 20, 30, 25}, 1.5);
    Matrix p(4, x.cols());
    p << x.row(2), x.row(0), x.row(3), x.row(1);
    CHECK(ggs_fit(x, {3, 0.1, 5, 50}).breakpoints == ggs_fit(p, {3, 0.1, 5, 50}).breakpoints);
}

TEST_CASE("label_segments maps four segments to phases") {
    const auto iv = label_segments(Segmentation{{100, 200, 300}, 0.0, 400});
    REQUIRE(iv.size() == 4);
    CHECK(iv[0].phase == Phase::Reach);
    CHECK(iv[0].begin == 0);
    CHECK(iv[0].end == 100);
    CHECK(iv[1].phase == Phase::Grasp);
    CHECK(iv[2].phase == Phase::Return);
    CHECK(iv[3].phase == Phase::Rest);
    CHECK(iv[3].begin == 300);
    CHECK(iv[3].end == 400);
    CHECK_THROWS_AS(label_segments(Segmentation{{100, 200}, 0.0, 400}), Error);
    CHECK_THROWS_AS(label_segments(Segmentation{{100, 300, 200}, 0.0, 400}), Error);
}
