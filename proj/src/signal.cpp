#include "graspfuse/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace graspfuse::signal {

namespace {

using cd = std::complex<double>;

cd bilinear(cd s, double fs) { return (1.0 + s / (2.0 * fs)) / (1.0 - s / (2.0 * fs)); }

Biquad section_from_poles(cd z1, cd z2) {
    // numerator (1 - z^-2): one zero at DC, one at Nyquist
    return Biquad{1.0, 0.0, -1.0, -(z1 + z2).real(), (z1 * z2).real()};
}

}  // namespace

BandEdges effective_band(const FilterSpec& spec) {
    const double fs = spec.sample_rate_hz;
    if (!(fs > 0.0) || !std::isfinite(fs)) fail("filter: sample rate must be positive");
    if (spec.order < 1) fail("filter: order must be at least 1");
    const double nyquist = fs / 2.0;
    double high = spec.high_cut_hz;
    if (high > nyquist && high < fs) high = fs - high;
    if (!(spec.low_cut_hz > 0.0) || !(high < nyquist) || !(spec.low_cut_hz < high)) {
        fail("filter: cutoffs " + std::to_string(spec.low_cut_hz) + "-" + std::to_string(spec.high_cut_hz) +
             " Hz violate 0 < low < high < Nyquist (" + std::to_string(nyquist) + " Hz)");
    }
    return {spec.low_cut_hz, high};
}

SosFilter::SosFilter(std::vector<Biquad> sections, double sample_rate_hz)
    : sections_(std::move(sections)), sample_rate_hz_(sample_rate_hz) {}

std::complex<double> SosFilter::response(double freq_hz) const {
    const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz_;
    const cd zi = std::polar(1.0, -w);
    const cd zi2 = zi * zi;
    cd h = 1.0;
    for (const auto& s : sections_) {
        h *= (s.b0 + s.b1 * zi + s.b2 * zi2) / (1.0 + s.a1 * zi + s.a2 * zi2);
    }
    return h;
}

double SosFilter::magnitude_db(double freq_hz) const { return 20.0 * std::log10(magnitude(freq_hz)); }

std::vector<std::complex<double>> SosFilter::poles() const {
    std::vector<cd> out;
    for (const auto& s : sections_) {
        // roots of z^2 + a1 z + a2
        const cd disc = std::sqrt(cd(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
        out.push_back((-s.a1 + disc) / 2.0);
        out.push_back((-s.a1 - disc) / 2.0);
    }
    return out;
}

bool SosFilter::is_stable() const {
    return std::ranges::all_of(poles(), [](cd p) { return std::abs(p) < 1.0; });
}

std::vector<double> SosFilter::filter(const std::vector<double>& x) const {
    std::vector<double> y(x);
    for (const auto& s : sections_) {
        double z1 = 0.0, z2 = 0.0;
        for (double& v : y) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}

SosFilter design_bandpass(const FilterSpec& spec) {
    const BandEdges band = effective_band(spec);
    const double fs = spec.sample_rate_hz;
    const int n = spec.order;

    const double wl = 2.0 * fs * std::tan(std::numbers::pi * band.low_hz / fs);
    const double wh = 2.0 * fs * std::tan(std::numbers::pi * band.high_hz / fs);
    const double bw = wh - wl;
    const double w0sq = wl * wh;

    std::vector<Biquad> sections;
    for (int k = 1; k <= n; ++k) {
        const cd p = std::polar(1.0, std::numbers::pi * (2.0 * k + n - 1) / (2.0 * n));
        if (p.imag() < -1e-12) continue;  // handled with its conjugate
        // low-pass -> band-pass: s^2 - p*bw*s + w0^2 = 0
        const cd disc = std::sqrt(p * p * bw * bw - 4.0 * w0sq);
        const cd s1 = (p * bw + disc) / 2.0;
        const cd s2 = (p * bw - disc) / 2.0;
        if (std::abs(p.imag()) <= 1e-12) {
            // real prototype pole: s1, s2 are a conjugate pair or both real
            sections.push_back(section_from_poles(bilinear(s1, fs), bilinear(s2, fs)));
        } else {
            const cd z1 = bilinear(s1, fs);
            const cd z2 = bilinear(s2, fs);
            sections.push_back(section_from_poles(z1, std::conj(z1)));
            sections.push_back(section_from_poles(z2, std::conj(z2)));
        }
    }

    SosFilter unscaled(sections, fs);
    const double center_hz = fs / std::numbers::pi * std::atan(std::sqrt(w0sq) / (2.0 * fs));
    const double gain = 1.0 / unscaled.magnitude(center_hz);
    const double per_section = std::pow(gain, 1.0 / static_cast<double>(sections.size()));
    for (auto& s : sections) {
        s.b0 *= per_section;
        s.b1 *= per_section;
        s.b2 *= per_section;
    }
    SosFilter out(std::move(sections), fs);
    if (!out.is_stable()) fail("filter: design produced an unstable filter");
    return out;
}

Matrix apply_filter(const SosFilter& filter, const Matrix& raw) {
    Matrix out(raw.rows(), raw.cols());
    std::vector<double> row(static_cast<std::size_t>(raw.cols()));
    for (Eigen::Index c = 0; c < raw.rows(); ++c) {
        for (Eigen::Index n = 0; n < raw.cols(); ++n) {
            const double v = raw(c, n);
            if (!std::isfinite(v)) {
                fail("filter: non-finite sample at channel " + std::to_string(c) + ", index " + std::to_string(n));
            }
            row[static_cast<std::size_t>(n)] = v;
        }
        const auto y = filter.filter(row);
        for (Eigen::Index n = 0; n < raw.cols(); ++n) out(c, n) = y[static_cast<std::size_t>(n)];
    }
    return out;
}

Envelope rms_envelope(const Matrix& filtered, int window_samples, double sample_rate_hz) {
    if (window_samples < 1) fail("envelope: window must be at least one sample");
    Envelope env{Matrix(filtered.rows(), filtered.cols()), sample_rate_hz};
    const Eigen::Index n_total = filtered.cols();
    for (Eigen::Index c = 0; c < filtered.rows(); ++c) {
        double sum = 0.0;
        for (Eigen::Index n = 0; n < n_total; ++n) {
            const double v = filtered(c, n);
            sum += v * v;
            if (n >= window_samples) {
                const double old = filtered(c, n - window_samples);
                sum -= old * old;
            }
            // refresh the running sum once per window to bound drift
            if (n % window_samples == window_samples - 1) {
                sum = 0.0;
                for (Eigen::Index k = n - window_samples + 1; k <= n; ++k) sum += filtered(c, k) * filtered(c, k);
            }
            const double count = static_cast<double>(std::min<Eigen::Index>(n + 1, window_samples));
            env.values(c, n) = std::sqrt(std::max(sum, 0.0) / count);
        }
    }
    return env;
}

Envelope mvc_normalize(const Envelope& env, const MvcProfile& mvc) {
    if (mvc.mvc_value.size() != env.values.rows()) fail("mvc_normalize: channel count mismatch");
    for (int c = 0; c < mvc.mvc_value.size(); ++c) {
        if (!(mvc.mvc_value[c] > 0.0)) {
            fail("mvc_normalize: MVC value for channel " + std::to_string(c) + " must be positive");
        }
    }
    Envelope out = env;
    for (Eigen::Index c = 0; c < out.values.rows(); ++c) out.values.row(c) /= mvc.mvc_value[c];
    return out;
}

MvcProfile compute_mvc(const TrialRecord& mvc_trial, const FilterSpec& spec, int envelope_window) {
    const auto filter = design_bandpass(spec);
    const auto env = rms_envelope(apply_filter(filter, mvc_trial.samples), envelope_window, mvc_trial.sample_rate_hz);
    MvcProfile out{mvc_trial.subject_id, Vector(env.values.rows())};
    for (Eigen::Index c = 0; c < env.values.rows(); ++c) {
        const double peak = env.values.row(c).maxCoeff();
        if (!(peak > 1e-12)) {
            fail("compute_mvc: channel " + std::to_string(c) + " of " + mvc_trial.trial_id() + " is silent");
        }
        out.mvc_value[c] = peak;
    }
    return out;
}

WindowGeometry window_geometry(double sample_rate_hz, double window_ms, double hop_ms) {
    const int t = static_cast<int>(std::lround(window_ms * sample_rate_hz / 1000.0));
    const int h = static_cast<int>(std::lround(hop_ms * sample_rate_hz / 1000.0));
    if (t < 1 || h < 1) fail("window geometry: window and hop must span at least one sample");
    return {t, h};
}

std::vector<EmgWindow> slide_windows(const Envelope& env, double window_ms, double hop_ms) {
    const auto g = window_geometry(env.sample_rate_hz, window_ms, hop_ms);
    std::vector<EmgWindow> out;
    const int n = env.length();
    if (n < g.length_samples) return out;
    const int count = (n - g.length_samples) / g.hop_samples + 1;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int start = i * g.hop_samples;
        out.push_back(EmgWindow{env.values.middleCols(start, g.length_samples), start,
                                1000.0 * start / env.sample_rate_hz});
    }
    return out;
}

double window_decision_time_ms(int index, const WindowGeometry& g, double sample_rate_hz) {
    return 1000.0 * (static_cast<double>(index) * g.hop_samples + g.length_samples) / sample_rate_hz;
}

Envelope preprocess(const TrialRecord& trial, const MvcProfile& mvc, const PreprocessConfig& cfg) {
    FilterSpec spec = cfg.filter;
    spec.sample_rate_hz = trial.sample_rate_hz;
    const auto filter = design_bandpass(spec);
    const auto env = rms_envelope(apply_filter(filter, trial.samples), cfg.envelope_window, trial.sample_rate_hz);
    return mvc_normalize(env, mvc);
}

Matrix downsample_blocks(const Matrix& values, int hop_samples, int offset_samples) {
    if (hop_samples < 1) fail("downsample: hop must be positive");
    if (offset_samples < 0 || offset_samples > values.cols()) fail("downsample: offset outside series");
    const Eigen::Index blocks = (values.cols() - offset_samples) / hop_samples;
    Matrix out(values.rows(), blocks);
    for (Eigen::Index j = 0; j < blocks; ++j) {
        out.col(j) = values.middleCols(offset_samples + j * hop_samples, hop_samples).rowwise().mean();
    }
    return out;
}

}  // namespace graspfuse::signal
