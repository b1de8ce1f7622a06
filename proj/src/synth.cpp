#include "graspfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "graspfuse/signal.hpp"

namespace graspfuse::synth {

namespace {

constexpr double kImageW = 640.0;
constexpr double kImageH = 480.0;

int hop_samples(const ScenarioSpec& spec) {
    return static_cast<int>(std::lround(spec.hop_ms * kSampleRateHz / 1000.0));
}

int draw_hops(const DurationRange& r, double hop_ms, std::mt19937_64& rng) {
    const int lo = static_cast<int>(std::ceil(r.min_ms / hop_ms - 1e-9));
    const int hi = static_cast<int>(std::floor(r.max_ms / hop_ms + 1e-9));
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

ChannelMeans uniform_pattern(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    ChannelMeans m{};
    for (auto& v : m) v = u(rng);
    return m;
}

ChannelMeans mix(const ChannelMeans& a, double wa, const ChannelMeans& b, double wb) {
    ChannelMeans m{};
    for (int c = 0; c < kChannels; ++c) m[c] = wa * a[c] + wb * b[c];
    return m;
}

// Per-channel mean over every (label, phase) pair in use.
ChannelMeans grand_mean(const ScenarioSpec& spec) {
    ChannelMeans g{};
    int n = 0;
    for (int o = 1; o <= spec.n_objects; ++o) {
        for (const auto& m : spec.means_for(spec.label_of(o))) {
            for (int c = 0; c < kChannels; ++c) g[c] += m[c];
            ++n;
        }
    }
    for (auto& v : g) v /= n;
    return g;
}

// Unit-RMS band-limited noise, one row per channel.
Matrix carrier(int channels, int n, std::mt19937_64& rng) {
    static const signal::SosFilter shaping = signal::design_bandpass({2, 60.0, 500.0, kSampleRateHz});
    static const double gain = [] {
        std::vector<double> impulse(8192, 0.0);
        impulse[0] = 1.0;
        double energy = 0.0;
        for (double v : shaping.filter(impulse)) energy += v * v;
        return 1.0 / std::sqrt(energy);
    }();
    constexpr int warmup = 256;
    std::normal_distribution<double> noise(0.0, 1.0);
    Matrix out(channels, n);
    std::vector<double> white(static_cast<std::size_t>(n + warmup));
    for (int c = 0; c < channels; ++c) {
        for (auto& v : white) v = noise(rng);
        const auto y = shaping.filter(white);
        for (int i = 0; i < n; ++i) out(c, i) = gain * y[static_cast<std::size_t>(i + warmup)];
    }
    return out;
}

ChannelMeans subject_gains(const ScenarioSpec& spec, int subject) {
    std::mt19937_64 rng(derive_seed(spec.seed, stable_hash(subject_name(subject) + "/gains")));
    auto g = uniform_pattern(rng, 0.6, 1.6);
    for (auto& v : g) v *= spec.volts_scale;
    return g;
}

Matrix modulate(const std::vector<ChannelMeans>& blocks, int hop, const ChannelMeans& gains, std::mt19937_64& rng) {
    const int n = static_cast<int>(blocks.size()) * hop;
    Matrix x = carrier(kChannels, n, rng);
    for (int i = 0; i < n; ++i) {
        const auto& e = blocks[static_cast<std::size_t>(i / hop)];
        for (int c = 0; c < kChannels; ++c) {
            x(c, i) = static_cast<double>(static_cast<float>(gains[c] * e[c] * x(c, i)));
        }
    }
    return x;
}

ClassPosterior peaked_posterior(int peak, int keep, double keep_share, std::mt19937_64& rng, double peak_lo = 0.5,
                                double peak_hi = 0.9) {
    // `keep` (if a label) retains keep_share of the off-peak mass
    std::uniform_real_distribution<double> peak_mass(peak_lo, peak_hi);
    std::exponential_distribution<double> spread(1.0);
    const double m = peak_mass(rng);
    std::vector<double> p(kGraspLabels, 0.0);
    double others = 1.0 - m;
    if (keep >= 1) {
        p[static_cast<std::size_t>(keep - 1)] = keep_share * others;
        others *= 1.0 - keep_share;
    }
    std::vector<double> w(kGraspLabels, 0.0);
    double total = 0.0;
    for (int l = 1; l <= kGraspLabels; ++l) {
        if (l == peak || l == keep) continue;
        w[static_cast<std::size_t>(l - 1)] = spread(rng);
        total += w[static_cast<std::size_t>(l - 1)];
    }
    for (int l = 1; l <= kGraspLabels; ++l) {
        if (l == peak || l == keep) continue;
        p[static_cast<std::size_t>(l - 1)] = others * w[static_cast<std::size_t>(l - 1)] / total;
    }
    p[static_cast<std::size_t>(peak - 1)] = m;
    return ClassPosterior(std::move(p), 1);
}

int other_label(int label, std::mt19937_64& rng) {
    const int k = std::uniform_int_distribution<int>(1, kGraspLabels - 1)(rng);
    return k >= label ? k + 1 : k;
}

}  // namespace

int ScenarioSpec::label_of(int object) const {
    if (object < 1 || object > n_objects) fail("scenario: object " + std::to_string(object) + " out of range");
    return labels.empty() ? object : labels[static_cast<std::size_t>(object - 1)];
}

const PhaseMeans& ScenarioSpec::means_for(int label) const {
    const auto it = means.find(label);
    if (it == means.end()) fail("scenario: no envelope means for label " + std::to_string(label));
    return it->second;
}

void ScenarioSpec::validate() const {
    if (n_subjects < 1 || n_objects < 1 || trials_per_object < 1) fail("scenario: counts must be positive");
    if (!labels.empty() && static_cast<int>(labels.size()) != n_objects) {
        fail("scenario: labels must list one grasp label per object");
    }
    for (int o = 1; o <= n_objects; ++o) {
        const int l = label_of(o);
        if (l < 1 || l > kGraspLabels) fail("scenario: object labels must lie in 1..13");
        means_for(l);
    }
    for (const auto* r : {&reach, &grasp, &ret, &rest}) {
        if (!(r->min_ms > 0.0) || r->max_ms < r->min_ms) fail("scenario: phase durations must be positive ranges");
        if (std::floor(r->max_ms / hop_ms + 1e-9) < std::ceil(r->min_ms / hop_ms - 1e-9)) {
            fail("scenario: a duration range holds no whole hop");
        }
    }
    if (!(hop_ms > 0.0) || lead_in_ms < 0.0) fail("scenario: hop must be positive and lead-in non-negative");
    auto negative = [](double v) { return !(v >= 0.0); };
    if (std::ranges::any_of(envelope_cv, negative) || std::ranges::any_of(trial_sd, negative) || !(separation >= 0.0) || !(rest_level > 0.0)) {
        fail("scenario: envelope parameters must be non-negative");
    }
    for (double c : vision_confusion) {
        if (!(c >= 0.0 && c <= 1.0)) fail("scenario: confusion rates must lie in [0, 1]");
    }
    if (!(vision_rate_hz > 0.0) || !(volts_scale > 0.0)) fail("scenario: rates and scales must be positive");
}

void fill_default_means(ScenarioSpec& spec) {
    std::mt19937_64 shared(derive_seed(spec.seed, stable_hash("means/shared")));
    const auto transport = uniform_pattern(shared, 0.25, 0.5);
    const auto rest_pattern = uniform_pattern(shared, 0.8, 1.2);
    for (int o = 1; o <= spec.n_objects; ++o) {
        const int label = spec.label_of(o);
        if (spec.means.contains(label)) continue;
        std::mt19937_64 rng(derive_seed(spec.seed, stable_hash("means/label" + std::to_string(label))));
        const auto pattern = uniform_pattern(rng, 0.1, 0.6);
        PhaseMeans m{};
        m[static_cast<int>(Phase::Reach)] = mix(transport, 0.6, pattern, 0.4);
        m[static_cast<int>(Phase::Grasp)] = pattern;
        m[static_cast<int>(Phase::Return)] = mix(transport, 0.55, pattern, 0.45);
        auto& r = m[static_cast<int>(Phase::Rest)];
        for (int c = 0; c < kChannels; ++c) {
            r[c] = spec.rest_level * rest_pattern[c];
            if (!spec.emg_rest_degradation) r[c] += 0.15 * pattern[c];
        }
        spec.means[label] = m;
    }
}

ScenarioSpec default_scenario(std::uint64_t seed) {
    ScenarioSpec spec;
    spec.seed = seed;
    fill_default_means(spec);
    return spec;
}

nlohmann::ordered_json scenario_to_json(const ScenarioSpec& spec) {
    using J = nlohmann::ordered_json;
    auto range = [](const DurationRange& r) { return J::array({r.min_ms, r.max_ms}); };
    J j;
    j["n_subjects"] = spec.n_subjects;
    j["n_objects"] = spec.n_objects;
    j["labels"] = spec.labels;
    j["trials_per_object"] = spec.trials_per_object;
    j["durations_ms"] = {{"reach", range(spec.reach)},
                         {"grasp", range(spec.grasp)},
                         {"return", range(spec.ret)},
                         {"rest", range(spec.rest)}};
    j["lead_in_ms"] = spec.lead_in_ms;
    j["hop_ms"] = spec.hop_ms;
    j["envelope_cv"] = {{"reach", spec.envelope_cv[0]},
                        {"grasp", spec.envelope_cv[1]},
                        {"return", spec.envelope_cv[2]},
                        {"rest", spec.envelope_cv[3]}};
    j["trial_sd"] = {{"reach", spec.trial_sd[0]},
                     {"grasp", spec.trial_sd[1]},
                     {"return", spec.trial_sd[2]},
                     {"rest", spec.trial_sd[3]}};
    j["separation"] = spec.separation;
    j["rest_level"] = spec.rest_level;
    j["emg_rest_degradation"] = spec.emg_rest_degradation;
    j["vision_confusion"] = {{"reach", spec.vision_confusion[0]},
                             {"grasp", spec.vision_confusion[1]},
                             {"return", spec.vision_confusion[2]},
                             {"rest", spec.vision_confusion[3]}};
    j["vision_rate_hz"] = spec.vision_rate_hz;
    j["volts_scale"] = spec.volts_scale;
    j["seed"] = spec.seed;
    J means = J::object();
    for (const auto& [label, pm] : spec.means) {
        J per_phase;
        for (int p = 0; p < 4; ++p) per_phase[std::string(phase_name(static_cast<Phase>(p)))] = pm[p];
        means[std::to_string(label)] = per_phase;
    }
    j["means"] = means;
    return j;
}

ScenarioSpec scenario_from_json(const nlohmann::ordered_json& j) {
    ScenarioSpec s;
    try {
        s.n_subjects = j.value("n_subjects", s.n_subjects);
        s.n_objects = j.value("n_objects", s.n_objects);
        s.labels = j.value("labels", s.labels);
        s.trials_per_object = j.value("trials_per_object", s.trials_per_object);
        if (j.contains("durations_ms")) {
            const auto& d = j.at("durations_ms");
            auto read = [&](const char* key, DurationRange& r) {
                if (!d.contains(key)) return;
                const auto v = d.at(key).get<std::vector<double>>();
                if (v.size() != 2) fail(std::string("scenario: duration ") + key + " needs [min, max]");
                r = {v[0], v[1]};
            };
            read("reach", s.reach);
            read("grasp", s.grasp);
            read("return", s.ret);
            read("rest", s.rest);
        }
        s.lead_in_ms = j.value("lead_in_ms", s.lead_in_ms);
        s.hop_ms = j.value("hop_ms", s.hop_ms);
        auto read_by_phase = [&](const char* key, std::array<double, 4>& dst) {
            if (!j.contains(key)) return;
            const auto& v = j.at(key);
            if (v.is_number()) {
                dst.fill(v.get<double>());
                return;
            }
            for (int p = 0; p < 4; ++p) dst[p] = v.value(std::string(phase_name(static_cast<Phase>(p))), dst[p]);
        };
        read_by_phase("envelope_cv", s.envelope_cv);
        read_by_phase("trial_sd", s.trial_sd);
        s.separation = j.value("separation", s.separation);
        s.rest_level = j.value("rest_level", s.rest_level);
        s.emg_rest_degradation = j.value("emg_rest_degradation", s.emg_rest_degradation);
        if (j.contains("vision_confusion")) {
            const auto& v = j.at("vision_confusion");
            for (int p = 0; p < 4; ++p) {
                const std::string key(phase_name(static_cast<Phase>(p)));
                s.vision_confusion[p] = v.value(key, s.vision_confusion[p]);
            }
        }
        s.vision_rate_hz = j.value("vision_rate_hz", s.vision_rate_hz);
        s.volts_scale = j.value("volts_scale", s.volts_scale);
        s.seed = j.value("seed", s.seed);
        if (j.contains("means")) {
            for (const auto& [key, per_phase] : j.at("means").items()) {
                PhaseMeans pm{};
                for (int p = 0; p < 4; ++p) {
                    const auto v = per_phase.at(std::string(phase_name(static_cast<Phase>(p)))).get<std::vector<double>>();
                    if (v.size() != kChannels) fail("scenario: means for label " + key + " need 12 channels");
                    std::copy(v.begin(), v.end(), pm[p].begin());
                }
                s.means[std::stoi(key)] = pm;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("scenario: ") + e.what());
    }
    fill_default_means(s);
    s.validate();
    return s;
}

std::string subject_name(int subject) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%02d", subject);
    return buf;
}

std::string object_name(int object) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "o%02d", object);
    return buf;
}

PlantedTrial gen_trial(const ScenarioSpec& spec, int subject, int object, int trial_index) {
    spec.validate();
    if (subject < 1 || subject > spec.n_subjects) fail("gen_trial: subject out of range");
    if (trial_index < 1 || trial_index > spec.trials_per_object) fail("gen_trial: trial index out of range");

    PlantedTrial out;
    TrialRecord& t = out.trial;
    t.subject_id = subject_name(subject);
    t.object_id = object_name(object);
    t.trial_index = trial_index;
    t.session = Session::Clockwise;
    t.grasp_label = spec.label_of(object);
    t.sample_rate_hz = kSampleRateHz;

    std::mt19937_64 rng(derive_seed(spec.seed, stable_hash(t.trial_id())));
    const int hop = hop_samples(spec);
    const int lead = static_cast<int>(std::lround(spec.lead_in_ms / spec.hop_ms));
    const std::array<int, 4> hops{draw_hops(spec.reach, spec.hop_ms, rng), draw_hops(spec.grasp, spec.hop_ms, rng),
                                  draw_hops(spec.ret, spec.hop_ms, rng), draw_hops(spec.rest, spec.hop_ms, rng)};

    const auto& pm = spec.means_for(t.grasp_label);
    const auto grand = grand_mean(spec);
    auto mean_of = [&](Phase p) {
        ChannelMeans m{};
        for (int c = 0; c < kChannels; ++c) {
            m[c] = grand[c] + spec.separation * (pm[static_cast<int>(p)][c] - grand[c]);
        }
        return m;
    };

    std::normal_distribution<double> jitter(0.0, 1.0);
    // one offset per phase and trial, then multiplicative jitter per hop
    std::array<ChannelMeans, 4> offsets{};
    for (int p = 0; p < 4; ++p) {
        for (auto& v : offsets[static_cast<std::size_t>(p)]) v = spec.trial_sd[static_cast<std::size_t>(p)] * jitter(rng);
    }
    auto push_blocks = [&](Phase p, int count) {
        auto m = mean_of(p);
        for (int c = 0; c < kChannels; ++c) m[c] = std::max(0.01, m[c] + offsets[static_cast<std::size_t>(p)][c]);
        for (int i = 0; i < count; ++i) {
            ChannelMeans e{};
            for (int c = 0; c < kChannels; ++c) e[c] = m[c] * std::max(0.1, 1.0 + spec.envelope_cv[static_cast<std::size_t>(p)] * jitter(rng));
            out.block_envelope.push_back(e);
        }
    };
    push_blocks(Phase::Rest, lead);
    for (int p = 0; p < 4; ++p) push_blocks(static_cast<Phase>(p), hops[static_cast<std::size_t>(p)]);

    t.samples = modulate(out.block_envelope, hop, subject_gains(spec, subject), rng);
    t.lead_in_samples = lead * hop;
    t.validate();

    const int body = hops[0] + hops[1] + hops[2] + hops[3];
    out.planted = ggs::Segmentation{{hops[0], hops[0] + hops[1], hops[0] + hops[1] + hops[2]}, 0.0, body};
    out.timeline = annotate::TrialTimeline::from_segmentation(out.planted, t.lead_in_samples, hop, t.length(),
                                                              kSampleRateHz);
    return out;
}

TrialRecord gen_mvc_trial(const ScenarioSpec& spec, int subject) {
    spec.validate();
    constexpr int kBurstHops = 32;
    constexpr int kGapHops = 8;
    TrialRecord t;
    t.subject_id = subject_name(subject);
    t.is_mvc = true;
    t.grasp_label = 0;
    std::mt19937_64 rng(derive_seed(spec.seed, stable_hash(t.trial_id())));

    std::vector<ChannelMeans> blocks;
    ChannelMeans quiet{};
    quiet.fill(spec.rest_level);
    for (int c = 0; c < kChannels; ++c) {
        for (int i = 0; i < kGapHops; ++i) blocks.push_back(quiet);
        ChannelMeans burst = quiet;
        burst[c] = 1.0;
        for (int i = 0; i < kBurstHops; ++i) blocks.push_back(burst);
    }
    for (int i = 0; i < kGapHops; ++i) blocks.push_back(quiet);
    t.samples = modulate(blocks, hop_samples(spec), subject_gains(spec, subject), rng);
    t.validate();
    return t;
}

std::vector<DetectionFrame> gen_vision_stream(int label, const annotate::TrialTimeline& schedule,
                                              const std::array<double, 4>& confusion, std::uint64_t seed,
                                              double rate_hz) {
    if (label < 1 || label > kGraspLabels) fail("gen_vision_stream: label outside 1..13");
    for (double c : confusion) {
        if (!(c >= 0.0 && c <= 1.0)) fail("gen_vision_stream: confusion rates must lie in [0, 1]");
    }
    if (!(rate_hz > 0.0)) fail("gen_vision_stream: frame rate must be positive");
    schedule.validate();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double end_ms = schedule.ms(schedule.end);

    // the target sits still apart from a few pixels of per-frame jitter
    const double tw = 80.0 + 80.0 * unit(rng), th = 80.0 + 80.0 * unit(rng);
    const double tx = (kImageW - tw) * unit(rng), ty = (kImageH - th) * unit(rng);
    const int distractors = std::uniform_int_distribution<int>(1, 3)(rng);

    std::vector<DetectionFrame> frames;
    for (long k = 0;; ++k) {
        const double t_ms = 1000.0 * static_cast<double>(k) / rate_hz;
        if (t_ms >= end_ms) break;
        const int sample = static_cast<int>(std::floor(t_ms * schedule.sample_rate_hz / 1000.0));
        const Phase phase = schedule.phase_of_sample(sample);

        DetectionFrame f;
        f.time_ms = t_ms;
        DetectionBox target;
        target.w = tw;
        target.h = th;
        target.x = tx + 4.0 * (unit(rng) - 0.5);
        target.y = ty + 4.0 * (unit(rng) - 0.5);
        f.gaze_x = target.x + target.w * (0.1 + 0.8 * unit(rng));
        f.gaze_y = target.y + target.h * (0.1 + 0.8 * unit(rng));
        const bool confused = unit(rng) < confusion[static_cast<std::size_t>(phase)];
        // an occluded or misread object is also detected with less confidence
        target.probs = confused ? peaked_posterior(other_label(label, rng), label, 0.4, rng, 0.35, 0.6)
                                : peaked_posterior(label, 0, 0.0, rng);

        const std::size_t target_slot = std::uniform_int_distribution<std::size_t>(0, distractors)(rng);
        for (int d = 0; d < distractors; ++d) {
            DetectionBox b;
            b.w = 60.0 + 100.0 * unit(rng);
            b.h = 60.0 + 100.0 * unit(rng);
            for (int attempt = 0; attempt < 20; ++attempt) {
                b.x = (kImageW - b.w) * unit(rng);
                b.y = (kImageH - b.h) * unit(rng);
                if (!b.contains(f.gaze_x, f.gaze_y)) break;
            }
            if (b.contains(f.gaze_x, f.gaze_y)) continue;
            const int peak = std::uniform_int_distribution<int>(1, kGraspLabels)(rng);
            b.probs = peaked_posterior(peak, 0, 0.0, rng);
            f.boxes.push_back(std::move(b));
        }
        f.boxes.insert(f.boxes.begin() + static_cast<long>(std::min(target_slot, f.boxes.size())), std::move(target));
        f.validate();
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace graspfuse::synth
