#include <doctest.h>

#include <random>

#include "graspfuse/trees.hpp"

using namespace graspfuse;
using namespace graspfuse::trees;

namespace {

Dataset blobs(std::mt19937_64& rng, int per_class, double separation) {
    Dataset d(2);
    std::normal_distribution<double> g;
    for (int i = 0; i < per_class; ++i) {
        for (int label : {1, 2}) {
            const double cx = label == 1 ? 0.0 : separation;
            const double z[2] = {cx + g(rng), g(rng)};
            d.add(z, label);
        }
    }
    return d;
}

// Distinct points with arbitrary labels: nothing conflicts.
Dataset conflict_free(std::mt19937_64& rng, int n, int dim, int classes) {
    Dataset d(dim);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> lab(0, classes - 1);
    std::vector<double> z(static_cast<std::size_t>(dim));
    for (int i = 0; i < n; ++i) {
        for (auto& v : z) v = u(rng);
        d.add(z, lab(rng));
    }
    return d;
}

std::vector<std::vector<double>> probes(std::mt19937_64& rng, int n, int dim, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
    for (auto& p : out) {
        for (auto& v : p) v = u(rng);
    }
    return out;
}

}  // namespace

TEST_CASE("single-class data gives single-leaf trees") {
    Dataset d(3);
    for (int i = 0; i < 10; ++i) {
        const double z[3] = {double(i), double(i * i), 1.0};
        d.add(z, 4);
    }
    ForestConfig cfg;
    cfg.n_trees = 7;
    const auto f = fit(d, cfg);
    CHECK(f.trees().size() == 7);
    for (const auto& t : f.trees()) CHECK(t.nodes().size() == 1);
    const double probe[3] = {100.0, -3.0, 0.0};
    const auto p = f.predict_proba(probe);
    CHECK(p.size() == kEmgClasses);
    CHECK(p.prob(4) == 1.0);
    CHECK(p.argmax_label() == 4);
}

TEST_CASE("separated blobs are classified") {
    std::mt19937_64 rng(6);
    const auto train = blobs(rng, 100, 6.0);
    const auto test = blobs(rng, 100, 6.0);
    ForestConfig cfg;
    cfg.class_count = 3;
    cfg.seed = 12;
    const auto f = fit(train, cfg);
    int correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) correct += f.predict_proba(test.row(i)).argmax_label() == test.label(i);
    CHECK(correct >= 190);
}

TEST_CASE("conflict-free training data is memorized") {
    std::mt19937_64 rng(21);
    const auto d = conflict_free(rng, 300, 5, kEmgClasses);
    ForestConfig cfg;
    cfg.seed = 3;
    cfg.n_trees = 20;
    const auto f = fit(d, cfg);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(f.predict_proba(d.row(i)).prob(d.label(i)) == 1.0);
}

TEST_CASE("same seed, same forest; thread count is irrelevant") {
    std::mt19937_64 rng(8);
    const auto d = conflict_free(rng, 200, 6, 4);
    ForestConfig cfg;
    cfg.class_count = 4;
    cfg.seed = 99;
    const auto a = fit(d, cfg);
    cfg.threads = 4;
    const auto b = fit(d, cfg);
    cfg.seed = 100;
    const auto c = fit(d, cfg);
    int differs = 0;
    for (const auto& p : probes(rng, 1000, 6, -1.5, 1.5)) {
        CHECK(a.predict_proba(p) == b.predict_proba(p));
        differs += !(a.predict_proba(p) == c.predict_proba(p));
    }
    CHECK(differs > 0);
}

TEST_CASE("forest posterior is the mean of tree posteriors and sums to one") {
    std::mt19937_64 rng(10);
    const auto d = conflict_free(rng, 150, 4, kEmgClasses);
    ForestConfig cfg;
    cfg.n_trees = 15;
    cfg.seed = 5;
    const auto f = fit(d, cfg);
    for (const auto& p : probes(rng, 1000, 4, -1.2, 1.2)) {
        const auto post = f.predict_proba(p);
        double sum = 0.0;
        for (double v : post.probs()) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        std::vector<double> mean(kEmgClasses, 0.0);
        for (const auto& t : f.trees()) {
            const auto tp = t.predict_proba(p);
            for (int k = 0; k < kEmgClasses; ++k) mean[k] += tp[k] / f.trees().size();
        }
        for (int k = 0; k < kEmgClasses; ++k) CHECK(post.probs()[k] == doctest::Approx(mean[k]).epsilon(1e-12));
    }
}

TEST_CASE("relabeling classes permutes the posterior") {
    std::mt19937_64 rng(14);
    const auto d = conflict_free(rng, 120, 3, 5);
    const int perm[5] = {3, 0, 4, 1, 2};
    Dataset q(3);
    for (std::size_t i = 0; i < d.size(); ++i) q.add(d.row(i), perm[d.label(i)]);
    ForestConfig cfg;
    cfg.class_count = 5;
    cfg.seed = 1;
    const auto a = fit(d, cfg);
    const auto b = fit(q, cfg);
    for (const auto& p : probes(rng, 300, 3, -1.0, 1.0)) {
        const auto pa = a.predict_proba(p);
        const auto pb = b.predict_proba(p);
        for (int k = 0; k < 5; ++k) CHECK(pa.prob(k) == doctest::Approx(pb.prob(perm[k])).epsilon(1e-12));
    }
}

TEST_CASE("constant features are never split on") {
    std::mt19937_64 rng(2);
    Dataset d(3);
    std::uniform_real_distribution<double> u;
    for (int i = 0; i < 50; ++i) {
        const double z[3] = {7.0, u(rng), -2.0};
        d.add(z, i % 2);
    }
    ForestConfig cfg;
    cfg.class_count = 2;
    const auto f = fit(d, cfg);
    for (const auto& t : f.trees()) {
        for (const auto& n : t.nodes()) CHECK((n.is_leaf() || n.feature == 1));
    }

    // all features constant with mixed labels: the root stays a leaf
    Dataset flat(2);
    const double z[2] = {1.0, 1.0};
    flat.add(z, 0);
    flat.add(z, 1);
    const auto g = fit(flat, cfg);
    CHECK(g.trees()[0].nodes().size() == 1);
    CHECK(g.predict_proba(z).prob(0) == doctest::Approx(0.5));
}

TEST_CASE("invalid inputs") {
    Dataset d(2);
    const double z3[3] = {1, 2, 3};
    CHECK_THROWS_AS(d.add(z3, 0), Error);
    const double z[2] = {1, 2};
    d.add(z, 0);
    CHECK_THROWS_AS(fit(d, {}), Error);
    d.add(z, 14);
    CHECK_THROWS_AS(fit(d, {}), Error);
    CHECK_THROWS_AS(Tree({Node{0, 0.5, 5, 6, -1}}, {}, 2).validate(2), Error);
}
