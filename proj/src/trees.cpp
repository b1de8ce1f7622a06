#include "graspfuse/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

namespace graspfuse::trees {

void Dataset::add(std::span<const double> z, int label) {
    if (static_cast<int>(z.size()) != dimension_) {
        fail("dataset: feature dimension " + std::to_string(z.size()) + " does not match " +
             std::to_string(dimension_));
    }
    features_.insert(features_.end(), z.begin(), z.end());
    labels_.push_back(label);
}

Tree::Tree(std::vector<Node> nodes, std::vector<std::vector<int>> leaf_histograms, int class_count)
    : nodes_(std::move(nodes)), histograms_(std::move(leaf_histograms)), class_count_(class_count) {}

const std::vector<int>& Tree::leaf_histogram(std::span<const double> z) const {
    int i = 0;
    while (!nodes_[static_cast<std::size_t>(i)].is_leaf()) {
        const auto& n = nodes_[static_cast<std::size_t>(i)];
        i = z[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return histograms_[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(i)].leaf)];
}

std::vector<double> Tree::predict_proba(std::span<const double> z) const {
    const auto& hist = leaf_histogram(z);
    const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
    std::vector<double> out(hist.size());
    for (std::size_t k = 0; k < hist.size(); ++k) out[k] = hist[k] / total;
    return out;
}

void Tree::validate(int dimension) const {
    if (nodes_.empty()) throw Error(ErrorKind::Schema, "tree has no nodes");
    std::vector<int> parents(nodes_.size(), 0);
    std::vector<int> leaf_uses(histograms_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.is_leaf()) {
            if (n.leaf < 0 || n.leaf >= static_cast<int>(histograms_.size())) {
                throw Error(ErrorKind::Schema, "tree leaf references a missing histogram");
            }
            ++leaf_uses[static_cast<std::size_t>(n.leaf)];
            continue;
        }
        if (n.feature >= dimension || !std::isfinite(n.threshold)) {
            throw Error(ErrorKind::Schema, "tree node has an invalid split");
        }
        for (int child : {n.left, n.right}) {
            if (child <= static_cast<int>(i) || child >= static_cast<int>(nodes_.size())) {
                throw Error(ErrorKind::Schema, "tree node has an invalid child index");
            }
            ++parents[static_cast<std::size_t>(child)];
        }
    }
    if (parents[0] != 0 || std::any_of(parents.begin() + 1, parents.end(), [](int p) { return p != 1; })) {
        throw Error(ErrorKind::Schema, "tree nodes do not form a binary tree");
    }
    if (std::any_of(leaf_uses.begin(), leaf_uses.end(), [](int u) { return u != 1; })) {
        throw Error(ErrorKind::Schema, "tree leaf histograms are not referenced exactly once");
    }
    for (const auto& h : histograms_) {
        if (static_cast<int>(h.size()) != class_count_ || std::any_of(h.begin(), h.end(), [](int c) { return c < 0; }) ||
            std::accumulate(h.begin(), h.end(), 0) <= 0) {
            throw Error(ErrorKind::Schema, "tree leaf histogram is malformed");
        }
    }
}

Forest::Forest(std::vector<Tree> trees, int dimension, ForestConfig config)
    : trees_(std::move(trees)), dimension_(dimension), config_(config) {}

ClassPosterior Forest::predict_proba(std::span<const double> z) const {
    if (static_cast<int>(z.size()) != dimension_) {
        fail("predict_proba: feature dimension " + std::to_string(z.size()) + " does not match forest dimension " +
             std::to_string(dimension_));
    }
    if (trees_.empty()) fail("predict_proba: forest has no trees");
    std::vector<double> acc(static_cast<std::size_t>(config_.class_count), 0.0);
    for (const auto& t : trees_) {
        const auto& hist = t.leaf_histogram(z);
        const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += hist[k] / total;
    }
    for (auto& v : acc) v /= static_cast<double>(trees_.size());
    return ClassPosterior(std::move(acc), 0);
}

namespace {

double gini(const std::vector<int>& counts, int n) {
    if (n == 0) return 0.0;
    double sum_sq = 0.0;
    for (int c : counts) sum_sq += static_cast<double>(c) * c;
    return 1.0 - sum_sq / (static_cast<double>(n) * n);
}

class TreeGrower {
public:
    TreeGrower(const Dataset& data, const ForestConfig& cfg, int candidates, std::uint64_t seed)
        : data_(data), cfg_(cfg), candidates_(candidates), rng_(seed) {}

    Tree grow() {
        std::vector<int> idx(data_.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::vector<int> features(static_cast<std::size_t>(data_.dimension()));
        std::iota(features.begin(), features.end(), 0);

        struct Pending {
            int node, begin, end;
        };
        std::vector<Pending> stack{{0, 0, static_cast<int>(idx.size())}};
        nodes_.emplace_back();
        std::vector<int> counts(static_cast<std::size_t>(cfg_.class_count));

        while (!stack.empty()) {
            const Pending p = stack.back();
            stack.pop_back();
            const int n = p.end - p.begin;

            std::ranges::fill(counts, 0);
            for (int i = p.begin; i < p.end; ++i) ++counts[static_cast<std::size_t>(data_.label(static_cast<std::size_t>(idx[i])))];
            const bool pure = std::ranges::count_if(counts, [](int c) { return c > 0; }) <= 1;
            if (pure || n < cfg_.min_samples_split) {
                make_leaf(p.node, counts);
                continue;
            }

            const double parent_gini = gini(counts, n);
            int best_feature = -1;
            double best_cut = 0.0;
            double best_decrease = -1.0;
            std::vector<int> left(counts.size()), right(counts.size());

            // partial Fisher-Yates: first `candidates_` entries are the draw
            for (int j = 0; j < candidates_; ++j) {
                std::uniform_int_distribution<int> pick(j, static_cast<int>(features.size()) - 1);
                std::swap(features[static_cast<std::size_t>(j)], features[static_cast<std::size_t>(pick(rng_))]);
                const int f = features[static_cast<std::size_t>(j)];

                double lo = data_.at(static_cast<std::size_t>(idx[p.begin]), f), hi = lo;
                for (int i = p.begin + 1; i < p.end; ++i) {
                    const double v = data_.at(static_cast<std::size_t>(idx[i]), f);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                if (!(hi > lo)) continue;
                std::uniform_real_distribution<double> draw(lo, hi);
                double cut = draw(rng_);
                if (!(cut < hi)) cut = lo;

                std::ranges::fill(left, 0);
                std::ranges::fill(right, 0);
                int nl = 0;
                for (int i = p.begin; i < p.end; ++i) {
                    const auto row = static_cast<std::size_t>(idx[i]);
                    if (data_.at(row, f) <= cut) {
                        ++left[static_cast<std::size_t>(data_.label(row))];
                        ++nl;
                    } else {
                        ++right[static_cast<std::size_t>(data_.label(row))];
                    }
                }
                const int nr = n - nl;
                const double decrease = parent_gini - (nl * gini(left, nl) + nr * gini(right, nr)) / n;
                if (decrease > best_decrease) {
                    best_decrease = decrease;
                    best_feature = f;
                    best_cut = cut;
                }
            }

            if (best_feature < 0) {
                make_leaf(p.node, counts);
                continue;
            }

            const auto mid_it = std::partition(idx.begin() + p.begin, idx.begin() + p.end, [&](int row) {
                return data_.at(static_cast<std::size_t>(row), best_feature) <= best_cut;
            });
            const int mid = static_cast<int>(mid_it - idx.begin());

            const int left_id = static_cast<int>(nodes_.size());
            nodes_.emplace_back();
            const int right_id = static_cast<int>(nodes_.size());
            nodes_.emplace_back();
            auto& node = nodes_[static_cast<std::size_t>(p.node)];
            node.feature = best_feature;
            node.threshold = best_cut;
            node.left = left_id;
            node.right = right_id;
            stack.push_back({right_id, mid, p.end});
            stack.push_back({left_id, p.begin, mid});
        }
        return Tree(std::move(nodes_), std::move(histograms_), cfg_.class_count);
    }

private:
    void make_leaf(int node, const std::vector<int>& counts) {
        nodes_[static_cast<std::size_t>(node)].leaf = static_cast<int>(histograms_.size());
        histograms_.push_back(counts);
    }

    const Dataset& data_;
    const ForestConfig& cfg_;
    int candidates_;
    std::mt19937_64 rng_;
    std::vector<Node> nodes_;
    std::vector<std::vector<int>> histograms_;
};

}  // namespace

Forest fit(const Dataset& data, const ForestConfig& config) {
    if (data.size() < 2) fail("fit: need at least 2 training samples");
    if (data.dimension() < 1) fail("fit: feature dimension must be positive");
    if (config.n_trees < 1) fail("fit: n_trees must be positive");
    if (config.min_samples_split < 2) fail("fit: min_samples_split must be at least 2");
    if (config.class_count < 1) fail("fit: class_count must be positive");
    for (int label : data.labels()) {
        if (label < 0 || label >= config.class_count) {
            fail("fit: label " + std::to_string(label) + " outside 0.." + std::to_string(config.class_count - 1));
        }
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.row(i)) {
            if (!std::isfinite(v)) fail("fit: non-finite feature in sample " + std::to_string(i));
        }
    }

    int candidates = config.candidate_features_per_node;
    if (candidates <= 0) candidates = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(data.dimension()))));
    candidates = std::min(candidates, data.dimension());

    std::vector<Tree> trees(static_cast<std::size_t>(config.n_trees));
    auto grow_range = [&](int worker, int workers) {
        for (int t = worker; t < config.n_trees; t += workers) {
            TreeGrower grower(data, config, candidates, derive_seed(config.seed, static_cast<std::uint64_t>(t)));
            trees[static_cast<std::size_t>(t)] = grower.grow();
        }
    };
    const int workers = std::clamp(config.threads, 1, config.n_trees);
    if (workers == 1) {
        grow_range(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(grow_range, w, workers);
    }
    return Forest(std::move(trees), data.dimension(), config);
}

}  // namespace graspfuse::trees
