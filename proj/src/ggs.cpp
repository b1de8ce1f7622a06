#include "graspfuse/ggs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace graspfuse::ggs {

namespace {

double loglik_from_cov(const Matrix& cov, int m, double lambda) {
    const auto c = cov.rows();
    Matrix s = cov;
    s.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) fail("segment covariance is singular; use lambda > 0");
    const Matrix& l = llt.matrixLLT();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < c; ++i) {
        const double d = l(i, i);
        if (!(d > 0.0)) fail("segment covariance is singular; use lambda > 0");
        logdet += 2.0 * std::log(d);
    }
    const double cd = static_cast<double>(c);
    return -0.5 * m * (cd * std::log(2.0 * std::numbers::pi) + logdet + cd);
}

// Segment log-likelihoods in O(C^2 + C^3) from prefix sums of x and x x^T.
class PrefixCost {
public:
    PrefixCost(const Matrix& series, double lambda) : lambda_(lambda), c_(series.rows()) {
        const Eigen::Index n = series.cols();
        const Vector center = series.rowwise().mean();  // limits cancellation
        s1_ = Matrix::Zero(c_, n + 1);
        s2_.assign(static_cast<std::size_t>(n + 1), Matrix::Zero(c_, c_));
        for (Eigen::Index t = 0; t < n; ++t) {
            const Vector x = series.col(t) - center;
            s1_.col(t + 1) = s1_.col(t) + x;
            s2_[static_cast<std::size_t>(t + 1)] = s2_[static_cast<std::size_t>(t)] + x * x.transpose();
        }
    }

    double operator()(int begin, int end) const {
        const int m = end - begin;
        const Vector mean = (s1_.col(end) - s1_.col(begin)) / m;
        Matrix cov = (s2_[static_cast<std::size_t>(end)] - s2_[static_cast<std::size_t>(begin)]) / m;
        cov.noalias() -= mean * mean.transpose();
        cov = 0.5 * (cov + cov.transpose());
        return loglik_from_cov(cov, m, lambda_);
    }

private:
    double lambda_;
    Eigen::Index c_;
    Matrix s1_;
    std::vector<Matrix> s2_;
};

}  // namespace

SegmentModel fit_segment(const Matrix& series, double lambda) {
    const int m = static_cast<int>(series.cols());
    if (m < 2) fail("segment_loglik: segment needs at least 2 samples");
    if (!(lambda >= 0.0)) fail("segment_loglik: lambda must be non-negative");
    SegmentModel out;
    out.length = m;
    out.mean = series.rowwise().mean();
    const Matrix centered = series.colwise() - out.mean;
    out.covariance = centered * centered.transpose() / static_cast<double>(m);
    out.loglik = loglik_from_cov(out.covariance, m, lambda);
    return out;
}

double segment_loglik(const Matrix& series, double lambda) { return fit_segment(series, lambda).loglik; }

double segmentation_objective(const Matrix& series, const std::vector<int>& breakpoints, double lambda) {
    double total = 0.0;
    int begin = 0;
    for (std::size_t i = 0; i <= breakpoints.size(); ++i) {
        const int end = i < breakpoints.size() ? breakpoints[i] : static_cast<int>(series.cols());
        if (end <= begin) fail("segmentation_objective: breakpoints must be strictly increasing inside the series");
        total += segment_loglik(series.middleCols(begin, end - begin), lambda);
        begin = end;
    }
    return total;
}

Segmentation ggs_fit(const Matrix& series, const GgsConfig& cfg, GgsTrace* trace) {
    const int n = static_cast<int>(series.cols());
    const int k = cfg.k;
    const int min_len = cfg.min_seg_len;
    if (k < 0) fail("ggs: K must be non-negative");
    if (min_len < 2) fail("ggs: min_seg_len must be at least 2");
    if (n < (k + 1) * min_len) {
        fail("ggs: " + std::to_string(k) + " breakpoints with min_seg_len " + std::to_string(min_len) +
             " do not fit a series of length " + std::to_string(n));
    }
    if (!(cfg.lambda >= 0.0)) fail("ggs: lambda must be non-negative");

    const PrefixCost cost(series, cfg.lambda);
    std::vector<int> bps;

    // bounds[i] .. bounds[i+1] delimit segment i
    auto bounds = [&] {
        std::vector<int> b{0};
        b.insert(b.end(), bps.begin(), bps.end());
        b.push_back(n);
        return b;
    };
    auto total = [&] {
        const auto b = bounds();
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < b.size(); ++i) sum += cost(b[i], b[i + 1]);
        return sum;
    };

    double objective = total();
    if (trace) trace->objectives.push_back(objective);

    for (int round = 0; round < k; ++round) {
        const auto b = bounds();
        double best_gain = -std::numeric_limits<double>::infinity();
        int best_t = -1;
        for (std::size_t s = 0; s + 1 < b.size(); ++s) {
            const int lo = b[s], hi = b[s + 1];
            if (hi - lo < 2 * min_len) continue;
            const double whole = cost(lo, hi);
            for (int t = lo + min_len; t <= hi - min_len; ++t) {
                const double gain = cost(lo, t) + cost(t, hi) - whole;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_t = t;
                }
            }
        }
        if (best_t < 0) {
            fail("ggs: no segment is long enough to place breakpoint " + std::to_string(round + 1));
        }
        bps.insert(std::upper_bound(bps.begin(), bps.end(), best_t), best_t);
        objective = total();
        if (trace) trace->objectives.push_back(objective);

        for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
            bool moved = false;
            for (std::size_t i = 0; i < bps.size(); ++i) {
                const int prev = i == 0 ? 0 : bps[i - 1];
                const int next = i + 1 == bps.size() ? n : bps[i + 1];
                const double current = cost(prev, bps[i]) + cost(bps[i], next);
                double best = -std::numeric_limits<double>::infinity();
                int where = bps[i];
                for (int t = prev + min_len; t <= next - min_len; ++t) {
                    const double v = cost(prev, t) + cost(t, next);
                    if (v > best) {
                        best = v;
                        where = t;
                    }
                }
                if (where != bps[i] && best > current) {
                    bps[i] = where;
                    objective = total();
                    moved = true;
                    if (trace) trace->objectives.push_back(objective);
                }
            }
            if (trace) ++trace->sweeps;
            if (!moved) break;
        }
    }
    return Segmentation{bps, objective, n};
}

std::vector<PhaseInterval> label_segments(const Segmentation& seg) {
    if (seg.breakpoints.size() != 3) {
        fail("label_segments: expected 3 breakpoints, found " + std::to_string(seg.breakpoints.size()));
    }
    const auto& b = seg.breakpoints;
    if (!(0 < b[0] && b[0] < b[1] && b[1] < b[2] && b[2] < seg.length)) {
        fail("label_segments: breakpoints must satisfy 0 < b1 < b2 < b3 < length");
    }
    return {{Phase::Reach, 0, b[0]}, {Phase::Grasp, b[0], b[1]}, {Phase::Return, b[1], b[2]},
            {Phase::Rest, b[2], seg.length}};
}

}  // namespace graspfuse::ggs
