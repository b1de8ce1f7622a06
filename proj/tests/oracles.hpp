#pragma once

// Independent reference implementations used by the tests. They favour
// directness over speed and share no code with the library.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "graspfuse/trial.hpp"

namespace oracle {

// |H(f)| of a digital Butterworth band-pass of prototype order n obtained by
// the bilinear transform with pre-warped edges lo and hi (both below fs/2).
inline double butterworth_bandpass_mag(double f, double lo, double hi, int n, double fs) {
    // a real filter's response is symmetric about fs/2 and periodic in fs
    f = std::fmod(f, fs);
    if (f > fs / 2) f = fs - f;
    auto warp = [fs](double hz) { return 2.0 * fs * std::tan(std::numbers::pi * hz / fs); };
    const double w = warp(f);
    const double wl = warp(lo);
    const double wh = warp(hi);
    if (w == 0.0) return 0.0;
    const double x = (w * w - wl * wh) / ((wh - wl) * w);
    return 1.0 / std::sqrt(1.0 + std::pow(x * x, n));
}

inline double to_db(double mag) { return 20.0 * std::log10(mag); }

struct NaiveFeatures {
    double rms, mav, var;
};

// Two passes: mean first, then centered squares.
inline NaiveFeatures naive_features(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    for (double v : x) sum += v;
    const double mean = sum / n;
    double sq = 0.0, abs_sum = 0.0, centered = 0.0;
    for (double v : x) {
        sq += v * v;
        abs_sum += std::abs(v);
        centered += (v - mean) * (v - mean);
    }
    return {std::sqrt(sq / n), abs_sum / n, centered / n};
}

// Trailing RMS over (n - w, n], partial at the start.
inline std::vector<double> naive_rms_envelope(const std::vector<double>& x, int w) {
    std::vector<double> out(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
        const std::size_t from = n + 1 >= static_cast<std::size_t>(w) ? n + 1 - static_cast<std::size_t>(w) : 0;
        double s = 0.0;
        for (std::size_t k = from; k <= n; ++k) s += x[k] * x[k];
        out[n] = std::sqrt(s / static_cast<double>(n - from + 1));
    }
    return out;
}

// Gaussian segment log-likelihood with covariance Sigma_hat + lambda I,
// evaluated from its definition via an LU determinant.
inline double segment_loglik(const Eigen::MatrixXd& x, int begin, int end, double lambda) {
    const int c = static_cast<int>(x.rows());
    const int m = end - begin;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(c);
    for (int t = begin; t < end; ++t) mu += x.col(t);
    mu /= m;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(c, c);
    for (int t = begin; t < end; ++t) {
        const Eigen::VectorXd d = x.col(t) - mu;
        s += d * d.transpose();
    }
    s /= m;
    s += lambda * Eigen::MatrixXd::Identity(c, c);
    const double det = s.fullPivLu().determinant();
    return -0.5 * m * (c * std::log(2.0 * std::numbers::pi) + std::log(det) + c);
}

struct ExhaustiveResult {
    std::vector<int> breakpoints;
    double objective = -std::numeric_limits<double>::infinity();
};

// Best placement of exactly k breakpoints with every segment >= min_len.
inline ExhaustiveResult exhaustive_ggs(const Eigen::MatrixXd& x, int k, int min_len, double lambda) {
    const int n = static_cast<int>(x.cols());
    ExhaustiveResult best;
    std::vector<int> b;
    auto rec = [&](auto&& self, int start, double acc) -> void {
        if (static_cast<int>(b.size()) == k) {
            if (n - start < min_len) return;
            const double total = acc + segment_loglik(x, start, n, lambda);
            if (total > best.objective) best = {b, total};
            return;
        }
        for (int e = start + min_len; e + min_len <= n; ++e) {
            b.push_back(e);
            self(self, e, acc + segment_loglik(x, start, e, lambda));
            b.pop_back();
        }
    };
    rec(rec, 0, 0.0);
    return best;
}

// Smallest containing box, else nearest center; ties by area then index.
inline std::optional<std::size_t> select_box(const graspfuse::DetectionFrame& f) {
    std::optional<std::size_t> pick;
    bool any_contains = false;
    for (const auto& b : f.boxes) any_contains = any_contains || b.contains(f.gaze_x, f.gaze_y);
    double best_key = std::numeric_limits<double>::infinity();
    double best_area = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < f.boxes.size(); ++i) {
        const auto& b = f.boxes[i];
        double key;
        if (any_contains) {
            if (!b.contains(f.gaze_x, f.gaze_y)) continue;
            key = b.area();
        } else {
            const double dx = b.center_x() - f.gaze_x;
            const double dy = b.center_y() - f.gaze_y;
            key = std::sqrt(dx * dx + dy * dy);
        }
        if (key < best_key || (key == best_key && b.area() < best_area)) {
            best_key = key;
            best_area = b.area();
            pick = i;
        }
    }
    return pick;
}

// Label (1-based) maximizing max(e_l, eps) * max(v_l, eps) after each input
// is scaled to unit mass; lowest label on ties.
inline int product_argmax(const std::vector<double>& e, const std::vector<double>& v, double eps) {
    long double se = 0, sv = 0;
    for (double x : e) se += x;
    for (double x : v) sv += x;
    int best = 1;
    long double best_q = -1;
    for (std::size_t l = 0; l < e.size(); ++l) {
        const long double a = std::max<long double>(e[l] / se, eps);
        const long double b = std::max<long double>(v[l] / sv, eps);
        if (a * b > best_q) {
            best_q = a * b;
            best = static_cast<int>(l) + 1;
        }
    }
    return best;
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, int n) {
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> p(static_cast<std::size_t>(n));
    double s = 0.0;
    for (auto& v : p) s += (v = ex(rng));
    for (auto& v : p) v /= s;
    return p;
}

}  // namespace oracle
