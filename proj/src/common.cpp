#include "graspfuse/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace graspfuse {

std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::Reach: return "reach";
        case Phase::Grasp: return "grasp";
        case Phase::Return: return "return";
        case Phase::Rest: return "rest";
    }
    return "rest";
}

Phase phase_from_name(std::string_view name) {
    if (name == "reach") return Phase::Reach;
    if (name == "grasp") return Phase::Grasp;
    if (name == "return") return Phase::Return;
    if (name == "rest") return Phase::Rest;
    fail("unknown phase '" + std::string(name) + "'");
}

ClassPosterior::ClassPosterior(std::vector<double> probs, int first_label)
    : probs_(std::move(probs)), first_label_(first_label) {}

ClassPosterior ClassPosterior::uniform(int count, int first_label) {
    return ClassPosterior(std::vector<double>(count, 1.0 / count), first_label);
}

ClassPosterior ClassPosterior::one_hot(int count, int first_label, int label) {
    std::vector<double> p(count, 0.0);
    if (label < first_label || label >= first_label + count) fail("one_hot label out of range");
    p[label - first_label] = 1.0;
    return ClassPosterior(std::move(p), first_label);
}

double ClassPosterior::prob(int label) const {
    if (!contains(label)) fail("label " + std::to_string(label) + " outside posterior range");
    return probs_[label - first_label_];
}

int ClassPosterior::argmax_label() const {
    if (probs_.empty()) fail("argmax of empty posterior");
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs_.size(); ++i) {
        if (probs_[i] > probs_[best]) best = i;
    }
    return first_label_ + static_cast<int>(best);
}

void ClassPosterior::validate(double tol) const {
    if (probs_.empty()) fail("empty posterior");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        const double p = probs_[i];
        if (!std::isfinite(p) || p < 0.0) {
            fail("posterior entry for label " + std::to_string(first_label_ + static_cast<int>(i)) +
                 " is not a finite non-negative number");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > tol) fail("posterior sums to " + std::to_string(sum));
}

void PosteriorStream::validate() const {
    if (times_ms.size() != posteriors.size()) fail("posterior stream: times/posteriors length mismatch");
    for (std::size_t i = 1; i < times_ms.size(); ++i) {
        if (!(times_ms[i] > times_ms[i - 1])) fail("posterior stream: times not strictly increasing");
    }
}

std::string_view source_name(PosteriorStream::Source s) {
    switch (s) {
        case PosteriorStream::Source::Emg: return "emg";
        case PosteriorStream::Source::Vision: return "vision";
        case PosteriorStream::Source::Fused: return "fused";
    }
    return "emg";
}

PosteriorStream::Source source_from_name(std::string_view name) {
    if (name == "emg") return PosteriorStream::Source::Emg;
    if (name == "vision") return PosteriorStream::Source::Vision;
    if (name == "fused") return PosteriorStream::Source::Fused;
    throw Error(ErrorKind::Parse, "unknown stream source '" + std::string(name) + "'");
}

std::uint64_t stable_hash(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace graspfuse
