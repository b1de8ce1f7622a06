#pragma once

#include <complex>
#include <vector>

#include "graspfuse/common.hpp"
#include "graspfuse/trial.hpp"

namespace graspfuse::signal {

struct FilterSpec {
    int order = 4;  // low-pass prototype order; the band-pass has 2*order poles
    double low_cut_hz = 40.0;
    double high_cut_hz = 800.0;
    double sample_rate_hz = kSampleRateHz;
};

/// Band edges actually realized by the digital design. A high cut between
/// Nyquist and the sample rate is folded onto its alias fs - high, so the
/// digital response at the requested frequency is the response at the edge.
struct BandEdges {
    double low_hz;
    double high_hz;
};

BandEdges effective_band(const FilterSpec& spec);

/// One second-order section, a0 normalized to 1.
struct Biquad {
    double b0, b1, b2;
    double a1, a2;
};

class SosFilter {
public:
    SosFilter() = default;
    SosFilter(std::vector<Biquad> sections, double sample_rate_hz);

    const std::vector<Biquad>& sections() const { return sections_; }
    double sample_rate_hz() const { return sample_rate_hz_; }

    std::complex<double> response(double freq_hz) const;
    double magnitude(double freq_hz) const { return std::abs(response(freq_hz)); }
    double magnitude_db(double freq_hz) const;

    std::vector<std::complex<double>> poles() const;
    bool is_stable() const;

    /// Causal direct-form-II-transposed filtering of one channel.
    std::vector<double> filter(const std::vector<double>& x) const;

private:
    std::vector<Biquad> sections_;
    double sample_rate_hz_ = kSampleRateHz;
};

/// Digital Butterworth band-pass by bilinear transform with pre-warped edges,
/// realized as cascaded second-order sections with unity gain at the
/// geometric band center.
SosFilter design_bandpass(const FilterSpec& spec);

/// Per-channel causal filtering; rejects non-finite samples.
Matrix apply_filter(const SosFilter& filter, const Matrix& raw);

struct Envelope {
    Matrix values;  // C x N, non-negative
    double sample_rate_hz = kSampleRateHz;

    int length() const { return static_cast<int>(values.cols()); }
};

/// Trailing-window RMS. Entry n covers samples (n - window, n]; the first
/// window-1 entries use the partial window so the output keeps length N.
Envelope rms_envelope(const Matrix& filtered, int window_samples = 150, double sample_rate_hz = kSampleRateHz);

Envelope mvc_normalize(const Envelope& env, const MvcProfile& mvc);

/// MVC per channel = peak of the filtered RMS envelope of the MVC recording.
MvcProfile compute_mvc(const TrialRecord& mvc_trial, const FilterSpec& spec = {}, int envelope_window = 150);

struct EmgWindow {
    Matrix samples;  // C x T_s
    int start_sample = 0;
    double start_time_ms = 0.0;
};

struct WindowGeometry {
    int length_samples;
    int hop_samples;
};

WindowGeometry window_geometry(double sample_rate_hz, double window_ms = 320.0, double hop_ms = 32.0);

/// Window i covers samples [i*H, i*H + T). Shorter inputs yield no windows.
std::vector<EmgWindow> slide_windows(const Envelope& env, double window_ms = 320.0, double hop_ms = 32.0);

/// End-exclusive time of window i in ms: the decision instant it feeds.
double window_decision_time_ms(int index, const WindowGeometry& g, double sample_rate_hz);

struct PreprocessConfig {
    FilterSpec filter;
    int envelope_window = 150;
    double window_ms = 320.0;
    double hop_ms = 32.0;
};

/// band-pass -> RMS envelope -> MVC normalization.
Envelope preprocess(const TrialRecord& trial, const MvcProfile& mvc, const PreprocessConfig& cfg = {});

/// Block means over [offset + j*hop, offset + (j+1)*hop); trailing partial
/// blocks are dropped. Output is C x floor((N - offset) / hop).
Matrix downsample_blocks(const Matrix& values, int hop_samples, int offset_samples = 0);

}  // namespace graspfuse::signal
