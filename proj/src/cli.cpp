#include "graspfuse/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "graspfuse/annotate.hpp"
#include "graspfuse/dataio.hpp"
#include "graspfuse/eval.hpp"
#include "graspfuse/features.hpp"
#include "graspfuse/fusion.hpp"
#include "graspfuse/gazevision.hpp"
#include "graspfuse/ggs.hpp"
#include "graspfuse/signal.hpp"
#include "graspfuse/synth.hpp"
#include "graspfuse/trees.hpp"

namespace graspfuse::cli {

namespace {

namespace fs = std::filesystem;
using dataio::Json;

struct Params {
    fs::path work = "work";
    std::string config;
    std::uint64_t seed = 1;
    bool seed_given = false;
    int threads = 1;
    double lambda = 0.1;
    int min_seg_len = 10;
    int k = 3;
    double eps = 1e-6;
    int smooth_window = 5;
    Json config_doc = Json::object();
};

// Runs fn(0..n-1) on up to `threads` workers. Results must be written to
// per-index slots so output order never depends on scheduling.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex guard;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) return;
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(guard);
                        if (!error) error = std::current_exception();
                        next.store(n);
                        return;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

std::string rel(const fs::path& root, const fs::path& p) { return p.lexically_relative(root).generic_string(); }

void require_file(const fs::path& p, const char* produced_by) {
    if (!fs::exists(p)) {
        throw Error(ErrorKind::Io, "missing input " + p.string() + " (run '" + produced_by + "' first)");
    }
}

void write_run_manifest(const fs::path& dir, const std::string& stage, const Json& parameters,
                        const std::vector<std::string>& inputs) {
    Json j;
    j["stage"] = stage;
    j["tool"] = "graspfuse";
    j["version"] = kToolVersion;
    j["parameters"] = parameters;
    j["inputs"] = inputs;
    dataio::write_json(dir / "run_manifest.json", j);
}

std::string fixed(double v, int digits) {
    if (!std::isfinite(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---- shared artifacts ----------------------------------------------------

struct IndexedTrial {
    std::string trial_id;
    std::string subject_id;
    std::string object_id;
    int trial_index = 1;
    int grasp_label = 1;
    int samples = 0;
    int lead_in_samples = 0;
    fs::path features;
    fs::path blocks;
    fs::path frames;  // empty when the dataset has no vision
};

struct PrepIndex {
    double sample_rate_hz = kSampleRateHz;
    signal::WindowGeometry geometry{500, 50};
    std::vector<IndexedTrial> trials;

    const IndexedTrial& find(const std::string& id) const {
        for (const auto& t : trials) {
            if (t.trial_id == id) return t;
        }
        throw Error(ErrorKind::Schema, "trial " + id + " is not in the preprocessing index");
    }
};

PrepIndex load_prep_index(const fs::path& work) {
    const fs::path path = work / "prep" / "index.json";
    require_file(path, "preprocess");
    const Json j = dataio::read_json(path);
    PrepIndex idx;
    idx.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    idx.geometry = {j.at("window_samples").get<int>(), j.at("hop_samples").get<int>()};
    for (const auto& t : j.at("trials")) {
        IndexedTrial it;
        it.trial_id = t.at("trial_id").get<std::string>();
        it.subject_id = t.at("subject_id").get<std::string>();
        it.object_id = t.at("object_id").get<std::string>();
        it.trial_index = t.at("trial_index").get<int>();
        it.grasp_label = t.at("grasp_label").get<int>();
        it.samples = t.at("samples").get<int>();
        it.lead_in_samples = t.at("lead_in_samples").get<int>();
        it.features = work / t.at("features").get<std::string>();
        it.blocks = work / t.at("blocks").get<std::string>();
        const auto frames = t.value("frames", std::string());
        if (!frames.empty()) it.frames = work / frames;
        idx.trials.push_back(std::move(it));
    }
    return idx;
}

struct SegEntry {
    ggs::Segmentation seg;
    int offset_samples = 0;
    int hop_samples = 50;
    int total_samples = 0;
    double sample_rate_hz = kSampleRateHz;

    annotate::TrialTimeline timeline() const {
        return annotate::TrialTimeline::from_segmentation(seg, offset_samples, hop_samples, total_samples,
                                                          sample_rate_hz);
    }
};

std::map<std::string, SegEntry> load_segmentations(const fs::path& work) {
    const fs::path path = work / "seg" / "segmentation.json";
    require_file(path, "segment");
    const Json j = dataio::read_json(path);
    std::map<std::string, SegEntry> out;
    for (const auto& t : j.at("trials")) {
        SegEntry e;
        e.seg = dataio::segmentation_from_json(t);
        e.offset_samples = t.at("offset_samples").get<int>();
        e.hop_samples = t.at("hop_samples").get<int>();
        e.total_samples = t.at("total_samples").get<int>();
        e.sample_rate_hz = t.at("sample_rate_hz").get<double>();
        out[t.at("trial_id").get<std::string>()] = e;
    }
    return out;
}

std::vector<features::FeatureVector> read_features(const fs::path& path, std::vector<double>* decision_times) {
    const auto table = dataio::load_table(path);
    const std::size_t first = table.column("rms1");
    const std::size_t start = table.column("start_time_ms");
    const std::size_t dec = table.column("decision_time_ms");
    std::vector<features::FeatureVector> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        features::FeatureVector f;
        f.start_time_ms = row[start];
        for (int i = 0; i < kFeatureDim; ++i) f.z[static_cast<std::size_t>(i)] = row[first + static_cast<std::size_t>(i)];
        out.push_back(f);
        if (decision_times) decision_times->push_back(row[dec]);
    }
    return out;
}

std::vector<std::string> validation_ids(const fs::path& work) {
    const fs::path path = work / "streams" / "index.json";
    require_file(path, "infer");
    return dataio::read_json(path).at("trials").get<std::vector<std::string>>();
}

// CSV whose first column is a text key and the rest numbers.
struct KeyedTable {
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, std::vector<double>>> rows;
};

void save_keyed(const KeyedTable& t, const fs::path& path, int digits = -1) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += "\n";
    for (const auto& [key, values] : t.rows) {
        out += key;
        for (double v : values) out += "," + (digits < 0 ? dataio::format_double(v) : fixed(v, digits));
        out += "\n";
    }
    dataio::write_text(path, out);
}

KeyedTable load_keyed(const fs::path& path) {
    std::istringstream in(dataio::read_text(path));
    KeyedTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    if (!std::getline(in, line)) throw Error(ErrorKind::Parse, path.string() + ": missing header");
    t.columns = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != t.columns.size()) throw Error(ErrorKind::Parse, path.string() + ": wrong column count");
        std::vector<double> values;
        for (std::size_t i = 1; i < cells.size(); ++i) values.push_back(dataio::parse_double(cells[i], path.string()));
        t.rows.emplace_back(cells[0], std::move(values));
    }
    return t;
}

// ---- stages --------------------------------------------------------------

void stage_synth(const Params& p, std::ostream& out) {
    Json scen = p.config_doc.contains("scenario") ? p.config_doc.at("scenario") : Json::object();
    if (p.seed_given) scen["seed"] = p.seed;
    const auto spec = synth::scenario_from_json(scen);
    const fs::path data = p.work / "data";
    fs::create_directories(data);
    dataio::write_json(data / "scenario.json", synth::scenario_to_json(spec));

    struct Job {
        int subject, object, trial;
    };
    std::vector<Job> jobs;
    for (int s = 1; s <= spec.n_subjects; ++s) {
        for (int o = 1; o <= spec.n_objects; ++o) {
            for (int t = 1; t <= spec.trials_per_object; ++t) jobs.push_back({s, o, t});
        }
    }
    std::vector<dataio::ManifestEntry> entries(jobs.size());
    std::vector<Json> truth(jobs.size());
    parallel_for(jobs.size(), p.threads, [&](std::size_t j) {
        const auto planted = synth::gen_trial(spec, jobs[j].subject, jobs[j].object, jobs[j].trial);
        const auto& trial = planted.trial;
        const std::string id = trial.trial_id();
        const fs::path dir = data / trial.subject_id;
        dataio::save_trial(trial, dir / (id + ".json"));
        const auto frames = synth::gen_vision_stream(trial.grasp_label, planted.timeline, spec.vision_confusion,
                                                     derive_seed(spec.seed, stable_hash(id + "/vision")),
                                                     spec.vision_rate_hz);
        dataio::save_frames(frames, dir / (id + ".frames.csv"));
        entries[j] = {id, id + ".json", id + ".frames.csv"};
        const auto& tl = planted.timeline;
        truth[j] = {{"trial_id", id},
                    {"subject_id", trial.subject_id},
                    {"grasp_label", trial.grasp_label},
                    {"sample_rate_hz", tl.sample_rate_hz},
                    {"hop_samples", (tl.grasp_start - tl.reach_start) / planted.planted.breakpoints[0]},
                    {"offset_samples", trial.lead_in_samples},
                    {"breakpoints", planted.planted.breakpoints},
                    {"length", planted.planted.length},
                    {"reach_start", tl.reach_start},
                    {"grasp_start", tl.grasp_start},
                    {"return_start", tl.return_start},
                    {"rest_start", tl.rest_start},
                    {"end", tl.end}};
    });

    Json subjects = Json::array();
    for (int s = 1; s <= spec.n_subjects; ++s) {
        const std::string sid = synth::subject_name(s);
        const fs::path dir = data / sid;
        dataio::save_trial(synth::gen_mvc_trial(spec, s), dir / (sid + "_mvc.json"));
        dataio::ManifestDoc doc;
        doc.subject_id = sid;
        doc.mvc.trial_file = sid + "_mvc.json";
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].subject == s) doc.trials.push_back(entries[j]);
        }
        dataio::save_manifest(doc, dir / "manifest.json");
        subjects.push_back({{"subject_id", sid}, {"manifest", sid + "/manifest.json"}});
    }
    dataio::write_json(data / "truth.json", Json{{"trials", truth}});
    dataio::write_json(data / "dataset.json", Json{{"schema_version", 1},
                                                   {"subjects", subjects},
                                                   {"truth", "truth.json"},
                                                   {"scenario", "scenario.json"}});
    write_run_manifest(data, "synth", {{"seed", spec.seed}, {"threads", p.threads}}, {});
    out << "synth: " << jobs.size() << " trials for " << spec.n_subjects << " subjects in " << data.string() << "\n";
}

void stage_preprocess(const Params& p, std::ostream& out) {
    const fs::path data = p.work / "data";
    require_file(data / "dataset.json", "synth");
    const Json dataset = dataio::read_json(data / "dataset.json");
    const fs::path prep = p.work / "prep";
    const signal::PreprocessConfig cfg;
    const auto geometry = signal::window_geometry(kSampleRateHz, cfg.window_ms, cfg.hop_ms);

    Json subjects = Json::array();
    Json trials = Json::array();
    for (const auto& entry : dataset.at("subjects")) {
        const auto manifest = dataio::load_manifest(data / entry.at("manifest").get<std::string>());
        if (!manifest.mvc) {
            throw Error(ErrorKind::Schema, "subject " + manifest.subject_id + ": manifest has no MVC reference");
        }
        const MvcProfile& mvc = *manifest.mvc;
        std::vector<Json> rows(manifest.trials.size());
        parallel_for(manifest.trials.size(), p.threads, [&](std::size_t i) {
            const auto& rec = manifest.trials[i].record;
            if (std::abs(rec.sample_rate_hz - kSampleRateHz) > 1e-9) {
                throw Error(ErrorKind::Schema, "trial " + rec.trial_id() + ": unsupported sample rate");
            }
            const auto env = signal::preprocess(rec, mvc, cfg);
            const auto windows = signal::slide_windows(env, cfg.window_ms, cfg.hop_ms);
            const auto feats = features::extract_all(windows);

            dataio::Table ft;
            ft.columns = {"window", "start_sample", "start_time_ms", "decision_time_ms"};
            for (const char* block : {"rms", "mav", "var"}) {
                for (int c = 1; c <= kChannels; ++c) ft.columns.push_back(block + std::to_string(c));
            }
            for (std::size_t w = 0; w < feats.size(); ++w) {
                std::vector<double> row{static_cast<double>(w), static_cast<double>(windows[w].start_sample),
                                        feats[w].start_time_ms,
                                        signal::window_decision_time_ms(static_cast<int>(w), geometry, rec.sample_rate_hz)};
                row.insert(row.end(), feats[w].z.begin(), feats[w].z.end());
                ft.rows.push_back(std::move(row));
            }

            const Matrix blocks = signal::downsample_blocks(env.values, geometry.hop_samples, rec.lead_in_samples);
            dataio::Table bt;
            bt.columns = {"block"};
            for (int c = 1; c <= kChannels; ++c) bt.columns.push_back("ch" + std::to_string(c));
            for (Eigen::Index b = 0; b < blocks.cols(); ++b) {
                std::vector<double> row{static_cast<double>(b)};
                for (int c = 0; c < kChannels; ++c) row.push_back(blocks(c, b));
                bt.rows.push_back(std::move(row));
            }

            const std::string id = rec.trial_id();
            const fs::path dir = prep / rec.subject_id;
            dataio::save_table(ft, dir / (id + ".features.csv"));
            dataio::save_table(bt, dir / (id + ".blocks.csv"));
            const auto& frames = manifest.trials[i].frames_path;
            rows[i] = {{"trial_id", id},
                       {"subject_id", rec.subject_id},
                       {"object_id", rec.object_id},
                       {"trial_index", rec.trial_index},
                       {"grasp_label", rec.grasp_label},
                       {"samples", rec.length()},
                       {"lead_in_samples", rec.lead_in_samples},
                       {"features", rel(p.work, dir / (id + ".features.csv"))},
                       {"blocks", rel(p.work, dir / (id + ".blocks.csv"))},
                       {"frames", frames.empty() ? std::string() : rel(p.work, frames)}};
        });
        for (auto& r : rows) trials.push_back(std::move(r));
        subjects.push_back({{"subject_id", manifest.subject_id},
                            {"mvc", std::vector<double>(mvc.mvc_value.begin(), mvc.mvc_value.end())}});
    }
    dataio::write_json(prep / "index.json", Json{{"schema_version", 1},
                                                 {"sample_rate_hz", kSampleRateHz},
                                                 {"window_samples", geometry.length_samples},
                                                 {"hop_samples", geometry.hop_samples},
                                                 {"envelope_window", cfg.envelope_window},
                                                 {"subjects", subjects},
                                                 {"trials", trials}});
    write_run_manifest(prep, "preprocess",
                       {{"filter", {{"order", cfg.filter.order},
                                    {"low_cut_hz", cfg.filter.low_cut_hz},
                                    {"high_cut_hz", cfg.filter.high_cut_hz}}},
                        {"envelope_window", cfg.envelope_window},
                        {"window_ms", cfg.window_ms},
                        {"hop_ms", cfg.hop_ms},
                        {"threads", p.threads}},
                       {"data/dataset.json"});
    out << "preprocess: " << trials.size() << " trials -> " << prep.string() << "\n";
}

void stage_segment(const Params& p, std::ostream& out) {
    const auto idx = load_prep_index(p.work);
    ggs::GgsConfig cfg;
    cfg.k = p.k;
    cfg.lambda = p.lambda;
    cfg.min_seg_len = p.min_seg_len;

    std::vector<Json> rows(idx.trials.size());
    parallel_for(idx.trials.size(), p.threads, [&](std::size_t i) {
        const auto& t = idx.trials[i];
        const auto table = dataio::load_table(t.blocks);
        Matrix x(kChannels, static_cast<Eigen::Index>(table.rows.size()));
        for (std::size_t b = 0; b < table.rows.size(); ++b) {
            for (int c = 0; c < kChannels; ++c) x(c, static_cast<Eigen::Index>(b)) = table.rows[b][static_cast<std::size_t>(c + 1)];
        }
        const auto seg = ggs::ggs_fit(x, cfg);
        Json row = {{"trial_id", t.trial_id},
                    {"offset_samples", t.lead_in_samples},
                    {"hop_samples", idx.geometry.hop_samples},
                    {"total_samples", t.samples},
                    {"sample_rate_hz", idx.sample_rate_hz}};
        row.update(dataio::segmentation_to_json(seg));
        rows[i] = std::move(row);
    });
    const fs::path dir = p.work / "seg";
    dataio::write_json(dir / "segmentation.json", Json{{"schema_version", 1},
                                                       {"k", cfg.k},
                                                       {"lambda", cfg.lambda},
                                                       {"min_seg_len", cfg.min_seg_len},
                                                       {"trials", rows}});
    write_run_manifest(dir, "segment",
                       {{"k", cfg.k}, {"lambda", cfg.lambda}, {"min_seg_len", cfg.min_seg_len},
                        {"max_sweeps", cfg.max_sweeps}, {"threads", p.threads}},
                       {"prep/index.json"});
    out << "segment: " << rows.size() << " trials, K=" << cfg.k << " -> " << (dir / "segmentation.json").string()
        << "\n";
}

void stage_train(const Params& p, std::ostream& out) {
    const auto idx = load_prep_index(p.work);
    const auto segs = load_segmentations(p.work);

    std::vector<annotate::TrialKey> keys;
    for (const auto& t : idx.trials) keys.push_back({t.subject_id, t.object_id, t.trial_index, t.trial_id});
    const auto splits = annotate::split_trials(keys, p.seed);

    std::vector<std::string> subjects;
    for (const auto& s : splits) {
        if (std::find(subjects.begin(), subjects.end(), s.subject_id) == subjects.end()) subjects.push_back(s.subject_id);
    }
    const fs::path dir = p.work / "models";
    Json models = Json::array();
    for (const auto& subject : subjects) {
        std::vector<std::string> ids;
        for (const auto& s : splits) {
            if (s.subject_id == subject) ids.insert(ids.end(), s.train.begin(), s.train.end());
        }
        std::vector<std::vector<annotate::LabeledWindow>> per_trial(ids.size());
        parallel_for(ids.size(), p.threads, [&](std::size_t i) {
            const auto& t = idx.find(ids[i]);
            const auto it = segs.find(t.trial_id);
            if (it == segs.end()) throw Error(ErrorKind::Schema, "trial " + t.trial_id + " has no segmentation");
            const auto windows = annotate::annotate_windows(read_features(t.features, nullptr), idx.geometry,
                                                            it->second.timeline(), t.grasp_label);
            per_trial[i] = annotate::training_filter(windows, annotate::SplitRole::Train);
        });
        trees::Dataset data(kFeatureDim);
        for (const auto& windows : per_trial) {
            for (const auto& w : windows) data.add(w.features.z, w.label);
        }
        trees::ForestConfig cfg;
        cfg.seed = derive_seed(p.seed, stable_hash(subject));
        cfg.threads = p.threads;
        const dataio::ModelArtifact model{subject, trees::fit(data, cfg)};
        const fs::path path = dir / (subject + ".model.json");
        dataio::save_model(model, path);
        models.push_back({{"subject_id", subject}, {"model", rel(p.work, path)}, {"training_windows", data.size()}});
        out << "train: " << subject << " forest on " << data.size() << " windows\n";
    }

    Json split_doc = Json::array();
    for (const auto& s : splits) {
        split_doc.push_back({{"subject_id", s.subject_id},
                             {"object_id", s.object_id},
                             {"train", s.train},
                             {"validation", s.validation}});
    }
    dataio::write_json(dir / "split.json", Json{{"seed", p.seed}, {"splits", split_doc}});
    dataio::write_json(dir / "models.json", Json{{"models", models}});
    const trees::ForestConfig defaults;
    write_run_manifest(dir, "train",
                       {{"seed", p.seed},
                        {"n_trees", defaults.n_trees},
                        {"min_samples_split", defaults.min_samples_split},
                        {"candidate_features_per_node", defaults.candidate_features_per_node},
                        {"threads", p.threads}},
                       {"prep/index.json", "seg/segmentation.json"});
}

void stage_infer(const Params& p, std::ostream& out) {
    const auto idx = load_prep_index(p.work);
    const fs::path split_path = p.work / "models" / "split.json";
    require_file(split_path, "train");
    const Json split = dataio::read_json(split_path);
    std::vector<std::string> ids;
    for (const auto& s : split.at("splits")) {
        for (const auto& id : s.at("validation")) ids.push_back(id.get<std::string>());
    }
    std::map<std::string, dataio::ModelArtifact> models;
    for (const auto& id : ids) {
        const auto& subject = idx.find(id).subject_id;
        if (!models.contains(subject)) {
            const fs::path path = p.work / "models" / (subject + ".model.json");
            require_file(path, "train");
            models[subject] = dataio::load_model(path);
        }
    }
    const fs::path dir = p.work / "streams";
    parallel_for(ids.size(), p.threads, [&](std::size_t i) {
        const auto& t = idx.find(ids[i]);
        const auto& forest = models.at(t.subject_id).forest;
        PosteriorStream s;
        s.source = PosteriorStream::Source::Emg;
        for (const auto& f : read_features(t.features, &s.times_ms)) s.posteriors.push_back(forest.predict_proba(f.z));
        dataio::save_stream(s, dir / (t.trial_id + ".emg.csv"));
    });
    dataio::write_json(dir / "index.json", Json{{"trials", ids}});
    write_run_manifest(dir, "infer", {{"threads", p.threads}}, {"prep/index.json", "models/split.json"});
    out << "infer: " << ids.size() << " validation streams -> " << dir.string() << "\n";
}

void stage_fuse(const Params& p, std::ostream& out) {
    const auto idx = load_prep_index(p.work);
    const auto ids = validation_ids(p.work);
    const fs::path dir = p.work / "fused";
    parallel_for(ids.size(), p.threads, [&](std::size_t i) {
        const auto& t = idx.find(ids[i]);
        const auto emg = dataio::load_stream(p.work / "streams" / (t.trial_id + ".emg.csv"));
        const auto frames = t.frames.empty() ? std::vector<DetectionFrame>{} : dataio::load_frames(t.frames);
        const auto vision = gazevision::resample_vision(frames, emg.times_ms);
        const auto emg13 = fusion::restrict_stream(emg);
        const auto fused = fusion::fuse_streams(emg13, vision, p.eps);
        const auto smoothed = fusion::smooth(fused, p.smooth_window);
        dataio::save_stream(vision, dir / (t.trial_id + ".vision.csv"));
        dataio::save_stream(emg13, dir / (t.trial_id + ".emg13.csv"));
        dataio::save_stream(fusion::to_stream(fused), dir / (t.trial_id + ".fused.csv"));
        dataio::save_stream(fusion::to_stream(smoothed), dir / (t.trial_id + ".smoothed.csv"));
    });
    write_run_manifest(dir, "fuse", {{"eps", p.eps}, {"smooth_window", p.smooth_window}, {"threads", p.threads}},
                       {"streams/index.json", "prep/index.json"});
    out << "fuse: " << ids.size() << " trials -> " << dir.string() << "\n";
}

const std::vector<std::string> kSources{"emg", "vision", "fused", "smoothed"};

void stage_eval(const Params& p, std::ostream& out) {
    const auto idx = load_prep_index(p.work);
    const auto segs = load_segmentations(p.work);
    const auto ids = validation_ids(p.work);

    std::map<std::string, annotate::TrialTimeline> truth;
    const fs::path truth_path = p.work / "data" / "truth.json";
    if (fs::exists(truth_path)) {
        const Json doc = dataio::read_json(truth_path);
        for (const auto& t : doc.at("trials")) {
            annotate::TrialTimeline tl;
            tl.sample_rate_hz = t.at("sample_rate_hz").get<double>();
            tl.reach_start = t.at("reach_start").get<int>();
            tl.grasp_start = t.at("grasp_start").get<int>();
            tl.return_start = t.at("return_start").get<int>();
            tl.rest_start = t.at("rest_start").get<int>();
            tl.end = t.at("end").get<int>();
            truth[t.at("trial_id").get<std::string>()] = tl;
        }
    }

    std::vector<eval::EvalTrial> emg14;
    std::map<std::string, std::vector<eval::EvalTrial>> by_source;
    std::vector<annotate::TrialTimeline> timelines;
    KeyedTable onset{{"trial_id", "onset_ms", "reach_start_ms", "grasp_start_ms", "within_reach"}, {}};
    int within = 0;
    for (const auto& id : ids) {
        const auto& t = idx.find(id);
        const auto it = segs.find(id);
        if (it == segs.end()) throw Error(ErrorKind::Schema, "trial " + id + " has no segmentation");
        const auto timeline = it->second.timeline();
        timelines.push_back(timeline);
        const eval::EvalTrial emg{dataio::load_stream(p.work / "streams" / (id + ".emg.csv")), timeline, t.grasp_label};
        emg14.push_back(emg);
        by_source["emg"].push_back({dataio::load_stream(p.work / "fused" / (id + ".emg13.csv")), timeline, t.grasp_label});
        for (const std::string src : {"vision", "fused", "smoothed"}) {
            by_source[src].push_back({dataio::load_stream(p.work / "fused" / (id + "." + src + ".csv")), timeline,
                                      t.grasp_label});
        }

        const auto tt = truth.contains(id) ? truth.at(id) : timeline;
        const auto o = eval::onset_for_trial({emg.stream, tt, t.grasp_label});
        within += o.within_reach ? 1 : 0;
        onset.rows.push_back({id,
                              {o.onset_ms.value_or(std::nan("")), tt.ms(tt.reach_start), tt.ms(tt.grasp_start),
                               o.within_reach ? 1.0 : 0.0}});
    }
    if (ids.empty()) throw Error(ErrorKind::InvalidArgument, "eval: no validation streams");

    const fs::path dir = p.work / "eval";

    std::vector<std::pair<std::string, std::vector<eval::EvalTrial>>> sources;
    for (const auto& s : kSources) sources.emplace_back(s, by_source[s]);
    KeyedTable acc{{"source", "rest_before", "reach", "grasp", "return", "rest_after", "total"}, {}};
    KeyedTable counts = acc;
    for (const auto& row : eval::per_phase_table(sources)) {
        std::vector<double> a, n;
        for (auto ph : eval::kTablePhases) {
            a.push_back(row.accuracy.accuracy(ph));
            n.push_back(static_cast<double>(row.accuracy.count[static_cast<std::size_t>(ph)]));
        }
        a.push_back(row.accuracy.total());
        n.push_back(static_cast<double>(row.accuracy.total_count()));
        acc.rows.emplace_back(row.source, a);
        counts.rows.emplace_back(row.source, n);
    }
    save_keyed(acc, dir / "phase_table.csv");
    save_keyed(counts, dir / "phase_counts.csv");

    std::vector<eval::AlignedTrial> aligned14;
    for (const auto& e : emg14) aligned14.push_back(eval::align_for_eval(e));
    dataio::Table emg_curve{{"time_ms", "coverage", "accuracy", "p_true", "p_rest", "p_top_competitor"}, {}};
    for (const auto& c : eval::accuracy_curve(aligned14)) {
        emg_curve.rows.push_back({c.time_ms, static_cast<double>(c.coverage), c.accuracy, c.p_true, c.p_rest,
                                  c.p_top_competitor});
    }
    dataio::save_table(emg_curve, dir / "emg_curve.csv");

    dataio::Table fusion_curve{{"time_ms", "coverage"}, {}};
    std::vector<std::vector<eval::CurvePoint>> curves;
    for (const auto& s : kSources) {
        fusion_curve.columns.push_back(s);
        std::vector<eval::AlignedTrial> aligned;
        for (const auto& e : by_source[s]) aligned.push_back(eval::align_for_eval(e));
        curves.push_back(eval::accuracy_curve(aligned));
    }
    for (std::size_t i = 0; i < curves[0].size(); ++i) {
        std::vector<double> row{curves[0][i].time_ms, static_cast<double>(curves[0][i].coverage)};
        for (const auto& c : curves) row.push_back(c[i].accuracy);
        fusion_curve.rows.push_back(std::move(row));
    }
    dataio::save_table(fusion_curve, dir / "fusion_curve.csv");

    save_keyed(onset, dir / "onset.csv");
    const auto mb = eval::mean_boundaries(timelines);
    dataio::write_json(dir / "boundaries.json", Json{{"reach_ms", mb.reach},
                                                     {"grasp_ms", mb.grasp},
                                                     {"return_ms", mb.ret},
                                                     {"rest_ms", mb.rest}});
    dataio::write_json(dir / "summary.json",
                       Json{{"validation_trials", ids.size()},
                            {"onset_within_reach", within},
                            {"onset_within_reach_fraction", static_cast<double>(within) / static_cast<double>(ids.size())},
                            {"onset_reference", truth.empty() ? "segmentation" : "ground_truth"}});
    write_run_manifest(dir, "eval", {{"pre_rest_ms", 700.0}, {"hop_ms", 32.0}},
                       {"streams/index.json", "fused", "seg/segmentation.json", "data/truth.json"});
    out << "eval: " << ids.size() << " validation trials -> " << dir.string() << "\n";
}

void stage_report(const Params& p, std::ostream& out) {
    const fs::path ev = p.work / "eval";
    require_file(ev / "phase_table.csv", "eval");
    const fs::path dir = p.work / "report";

    auto table = load_keyed(ev / "phase_table.csv");
    for (auto& [source, values] : table.rows) {
        for (auto& v : values) v *= 100.0;
    }
    save_keyed(table, dir / "table2.csv", 2);

    const auto onset = load_keyed(ev / "onset.csv");
    double lead_sum = 0.0;
    int found = 0, within = 0;
    for (const auto& [id, v] : onset.rows) {
        if (std::isfinite(v[0])) {
            lead_sum += v[2] - v[0];
            ++found;
        }
        within += v[3] > 0.5 ? 1 : 0;
    }
    const double n = static_cast<double>(onset.rows.size());
    KeyedTable onset_summary{{"metric", "value"}, {}};
    onset_summary.rows.push_back({"trials", {n}});
    onset_summary.rows.push_back({"onset_within_reach_pct", {n > 0 ? 100.0 * within / n : std::nan("")}});
    onset_summary.rows.push_back({"mean_lead_before_grasp_ms", {found ? lead_sum / found : std::nan("")}});
    save_keyed(onset_summary, dir / "onset_summary.csv", 2);

    const Json b = dataio::read_json(ev / "boundaries.json");
    const std::vector<std::pair<double, std::string>> markers{{b.at("reach_ms").get<double>(), "reach"},
                                                              {b.at("grasp_ms").get<double>(), "grasp"},
                                                              {b.at("return_ms").get<double>(), "return"},
                                                              {b.at("rest_ms").get<double>(), "rest"}};
    auto column = [](const dataio::Table& t, const std::string& name) {
        std::vector<double> v;
        const std::size_t c = t.column(name);
        for (const auto& r : t.rows) v.push_back(r[c]);
        return v;
    };

    const auto emg = dataio::load_table(ev / "emg_curve.csv");
    const auto time = column(emg, "time_ms");
    eval::PlotSpec fig_a{"EMG classifier, validation trials", "time from grasp onset (ms)", "probability / accuracy",
                         0.0, 1.0, {}, markers};
    fig_a.series = {{"accuracy", "#000000", time, column(emg, "accuracy")},
                    {"P(true)", "#1f77b4", time, column(emg, "p_true")},
                    {"P(rest)", "#2ca02c", time, column(emg, "p_rest")},
                    {"top competitor", "#d62728", time, column(emg, "p_top_competitor")}};
    dataio::write_text(dir / "fig5a_emg.svg", eval::line_plot_svg(fig_a));

    const auto fc = dataio::load_table(ev / "fusion_curve.csv");
    const auto ftime = column(fc, "time_ms");
    eval::PlotSpec fig_b{"Accuracy over 13 grasp labels", "time from grasp onset (ms)", "accuracy", 0.0, 1.0, {},
                         markers};
    fig_b.series = {{"EMG", "#1f77b4", ftime, column(fc, "emg")},
                    {"vision", "#ff7f0e", ftime, column(fc, "vision")},
                    {"fusion", "#2ca02c", ftime, column(fc, "fused")},
                    {"fusion, smoothed", "#9467bd", ftime, column(fc, "smoothed")}};
    dataio::write_text(dir / "fig5b_fusion.svg", eval::line_plot_svg(fig_b));

    write_run_manifest(dir, "report", Json::object(),
                       {"eval/phase_table.csv", "eval/onset.csv", "eval/emg_curve.csv", "eval/fusion_curve.csv"});
    out << "report: table2.csv, onset_summary.csv, fig5a_emg.svg, fig5b_fusion.svg -> " << dir.string() << "\n";
}

void load_config(Params& p, const std::map<std::string, CLI::Option*>& given) {
    if (p.config.empty()) return;
    p.config_doc = dataio::read_json(p.config);
    if (!p.config_doc.is_object()) throw Error(ErrorKind::Parse, p.config + ": config must be a JSON object");
    auto take = [&](const char* key, auto& field) {
        const auto it = given.find(key);
        const bool on_cli = it != given.end() && it->second->count() > 0;
        if (!on_cli && p.config_doc.contains(key)) {
            try {
                field = p.config_doc.at(key).get<std::decay_t<decltype(field)>>();
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorKind::Parse, p.config + ": bad value for " + key + ": " + e.what());
            }
        }
    };
    take("seed", p.seed);
    if (p.config_doc.contains("seed")) p.seed_given = true;
    take("threads", p.threads);
    take("lambda", p.lambda);
    take("min_seg_len", p.min_seg_len);
    take("k", p.k);
    take("eps", p.eps);
    take("smooth_window", p.smooth_window);
}

}  // namespace

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"synth", "preprocess", "segment", "train",
                                                "infer", "fuse",       "eval",    "report"};
    return names;
}

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Params p;
    CLI::App app{"graspfuse: EMG and vision grasp-intent pipeline", "graspfuse"};
    app.require_subcommand(1, 1);

    std::map<std::string, std::map<std::string, CLI::Option*>> given;
    std::map<std::string, CLI::App*> subs;
    const std::map<std::string, std::string> help{
        {"synth", "generate a synthetic dataset (trials, MVC, gaze/detection frames, ground truth)"},
        {"preprocess", "filter, envelope, MVC-normalize, window and extract features"},
        {"segment", "greedy Gaussian segmentation of every trial"},
        {"train", "split trials 4/2 per object and fit one extra-trees model per subject"},
        {"infer", "EMG posterior streams for validation trials"},
        {"fuse", "gaze-selected vision posteriors, fusion and smoothing"},
        {"eval", "per-phase accuracy, aligned curves and motion onset"},
        {"report", "Table II style CSV and Fig. 5 style SVG plots"}};
    for (const auto& name : stage_names()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        auto& g = given[name];
        sub->add_option("--out", p.work, "work directory holding all stage outputs")->capture_default_str();
        g["config"] = sub->add_option("--config", p.config, "JSON config (parameters and an optional \"scenario\")");
        g["seed"] = sub->add_option("--seed", p.seed, "base seed");
        g["threads"] = sub->add_option("--threads", p.threads, "worker threads")->check(CLI::PositiveNumber);
        if (name == "segment") {
            g["lambda"] = sub->add_option("--lambda", p.lambda, "covariance regularization")->check(CLI::NonNegativeNumber);
            g["min_seg_len"] = sub->add_option("--min-seg-len", p.min_seg_len, "minimum segment length in hops");
            g["k"] = sub->add_option("--k", p.k, "number of breakpoints");
        }
        if (name == "fuse") {
            g["eps"] = sub->add_option("--eps", p.eps, "probability floor before the product")->check(CLI::NonNegativeNumber);
            g["smooth_window"] = sub->add_option("--smooth-window", p.smooth_window, "moving-average length in hops");
        }
        subs[name] = sub;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    std::string stage;
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) stage = name;
    }
    try {
        p.seed_given = given[stage]["seed"]->count() > 0;
        load_config(p, given[stage]);
        if (stage == "synth") stage_synth(p, out);
        else if (stage == "preprocess") stage_preprocess(p, out);
        else if (stage == "segment") stage_segment(p, out);
        else if (stage == "train") stage_train(p, out);
        else if (stage == "infer") stage_infer(p, out);
        else if (stage == "fuse") stage_fuse(p, out);
        else if (stage == "eval") stage_eval(p, out);
        else if (stage == "report") stage_report(p, out);
    } catch (const Error& e) {
        err << "error (" << stage << "): " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "error (" << stage << "): malformed artifact: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error (" << stage << "): " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace graspfuse::cli
