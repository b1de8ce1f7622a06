#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace graspfuse {

inline constexpr int kChannels = 12;
inline constexpr double kSampleRateHz = 1562.5;
inline constexpr int kGraspLabels = 13;   // labels 1..13
inline constexpr int kEmgClasses = 14;    // labels 0..13, 0 = open palm / rest
inline constexpr int kFeatureDim = 3 * kChannels;
inline constexpr int kRestLabel = 0;

/// Channel-major sample matrix: row = channel, column = sample.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorKind { InvalidArgument, Io, Parse, Schema, Version };

/// Every recoverable failure in the toolkit surfaces as this exception; the
/// kind lets callers distinguish bad input from corrupt files.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); }

/// Motion phases of one reach-to-grasp trial, in temporal order.
enum class Phase { Reach = 0, Grasp = 1, Return = 2, Rest = 3 };

std::string_view phase_name(Phase p);
Phase phase_from_name(std::string_view name);

/// A probability distribution over a contiguous range of grasp labels.
/// Index i holds the probability of label `first_label() + i`; EMG posteriors
/// use labels 0..13, vision and fused posteriors use 1..13.
class ClassPosterior {
public:
    ClassPosterior() = default;
    ClassPosterior(std::vector<double> probs, int first_label);

    static ClassPosterior uniform(int count, int first_label);
    static ClassPosterior one_hot(int count, int first_label, int label);

    int first_label() const { return first_label_; }
    int last_label() const { return first_label_ + static_cast<int>(probs_.size()) - 1; }
    std::size_t size() const { return probs_.size(); }
    bool contains(int label) const { return label >= first_label_ && label <= last_label(); }

    double prob(int label) const;
    const std::vector<double>& probs() const { return probs_; }

    /// Label with the largest probability; ties go to the lowest label.
    int argmax_label() const;

    /// Throws unless entries are finite, non-negative and sum to 1 within tol.
    void validate(double tol = 1e-9) const;

    bool operator==(const ClassPosterior&) const = default;

private:
    std::vector<double> probs_;
    int first_label_ = 0;
};

/// Time-indexed sequence of posteriors from one evidence source.
struct PosteriorStream {
    enum class Source { Emg, Vision, Fused };

    Source source = Source::Emg;
    std::vector<double> times_ms;
    std::vector<ClassPosterior> posteriors;

    std::size_t size() const { return times_ms.size(); }
    void validate() const;
    bool operator==(const PosteriorStream&) const = default;
};

std::string_view source_name(PosteriorStream::Source s);
PosteriorStream::Source source_from_name(std::string_view name);

/// Stable 64-bit FNV-1a, used to derive per-item seeds from text keys.
std::uint64_t stable_hash(std::string_view text);

/// Mixes a base seed with a stream id into an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace graspfuse
