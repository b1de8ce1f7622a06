#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "graspfuse/common.hpp"

namespace graspfuse::trees {

struct ForestConfig {
    int n_trees = 50;
    int min_samples_split = 2;
    int candidate_features_per_node = 0;  // 0: ceil(sqrt(dimension))
    std::uint64_t seed = 0;
    int class_count = kEmgClasses;
    int threads = 1;  // tree growth only; results do not depend on it
};

/// Row-major feature matrix with one integer label per row.
class Dataset {
public:
    explicit Dataset(int dimension) : dimension_(dimension) {}

    void add(std::span<const double> z, int label);

    int dimension() const { return dimension_; }
    std::size_t size() const { return labels_.size(); }
    std::span<const double> row(std::size_t i) const {
        return {features_.data() + i * static_cast<std::size_t>(dimension_), static_cast<std::size_t>(dimension_)};
    }
    double at(std::size_t i, int feature) const { return features_[i * static_cast<std::size_t>(dimension_) + feature]; }
    int label(std::size_t i) const { return labels_[i]; }
    const std::vector<int>& labels() const { return labels_; }

private:
    int dimension_;
    std::vector<double> features_;
    std::vector<int> labels_;
};

/// Internal nodes send z[feature] <= threshold left. Leaves have feature -1
/// and index their class histogram through `leaf`.
struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1;

    bool is_leaf() const { return feature < 0; }
};

class Tree {
public:
    Tree() = default;
    Tree(std::vector<Node> nodes, std::vector<std::vector<int>> leaf_histograms, int class_count);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<std::vector<int>>& leaf_histograms() const { return histograms_; }
    int class_count() const { return class_count_; }

    const std::vector<int>& leaf_histogram(std::span<const double> z) const;

    /// Leaf class frequencies for z.
    std::vector<double> predict_proba(std::span<const double> z) const;

    /// Throws unless the node graph is a proper binary tree with valid leaves.
    void validate(int dimension) const;

private:
    std::vector<Node> nodes_;
    std::vector<std::vector<int>> histograms_;
    int class_count_ = 0;
};

class Forest {
public:
    Forest() = default;
    Forest(std::vector<Tree> trees, int dimension, ForestConfig config);

    const std::vector<Tree>& trees() const { return trees_; }
    int dimension() const { return dimension_; }
    int class_count() const { return config_.class_count; }
    const ForestConfig& config() const { return config_; }

    /// Mean of per-tree leaf class frequencies; labels 0..class_count-1.
    ClassPosterior predict_proba(std::span<const double> z) const;

private:
    std::vector<Tree> trees_;
    int dimension_ = 0;
    ForestConfig config_;
};

/// Extremely randomized trees: every tree sees the full training set; each
/// node draws candidate features without replacement, one uniform cut per
/// candidate inside its node-local range, and keeps the best Gini decrease.
Forest fit(const Dataset& data, const ForestConfig& config);

}  // namespace graspfuse::trees
