#include "graspfuse/dataio.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "graspfuse/signal.hpp"

namespace graspfuse::dataio {

namespace {

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorKind::Parse, what); }
[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorKind::Schema, what); }

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

// Runs `body`, turning JSON access failures into parse errors tagged with `context`.
template <typename F>
auto guarded(const std::string& context, F&& body) {
    try {
        return body();
    } catch (const nlohmann::json::exception& e) {
        parse_error(context + ": " + e.what());
    }
}

void check_version(const Json& doc, const char* key, int expected, const std::string& context) {
    if (!doc.contains(key)) schema_error(context + ": missing " + key);
    const int found = doc.at(key).get<int>();
    if (found != expected) {
        throw Error(ErrorKind::Version, context + ": unsupported " + key + " " + std::to_string(found) +
                                            " (expected " + std::to_string(expected) + ")");
    }
}

void put_f32(std::string& out, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

float get_f32(const std::string& in, std::size_t offset) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + static_cast<std::size_t>(b)]))
                << (8 * b);
    }
    return std::bit_cast<float>(bits);
}

std::string posterior_header(int first, int last) {
    std::string h = "time_ms";
    for (int l = first; l <= last; ++l) h += ",p" + std::to_string(l);
    return h;
}

}  // namespace

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

Json read_json(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        parse_error(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const Json& value) { write_text(path, value.dump(2) + "\n"); }

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& context) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (text.empty()) parse_error(context + ": empty number");
    double v = 0.0;
    const char* begin = text.data();
    if (*begin == '+') ++begin;
    const auto res = std::from_chars(begin, text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        parse_error(context + ": '" + std::string(text) + "' is not a number");
    }
    return v;
}

// ---- trials --------------------------------------------------------------

void save_trial(const TrialRecord& trial, const fs::path& json_path) {
    trial.validate();
    fs::path blob = json_path;
    blob.replace_extension(".f32");

    std::string bytes;
    bytes.reserve(static_cast<std::size_t>(trial.samples.size()) * 4);
    for (int c = 0; c < trial.channels(); ++c) {
        for (int n = 0; n < trial.length(); ++n) put_f32(bytes, static_cast<float>(trial.samples(c, n)));
    }
    write_text(blob, bytes);

    Json doc;
    doc["schema_version"] = kTrialSchemaVersion;
    doc["trial_id"] = trial.trial_id();
    doc["subject_id"] = trial.subject_id;
    doc["object_id"] = trial.object_id;
    doc["trial_index"] = trial.trial_index;
    doc["session"] = std::string(session_name(trial.session));
    doc["grasp_label"] = trial.is_mvc ? 0 : trial.grasp_label;
    doc["is_mvc"] = trial.is_mvc;
    doc["sample_rate_hz"] = trial.sample_rate_hz;
    doc["channels"] = trial.channels();
    doc["samples"] = trial.length();
    doc["lead_in_samples"] = trial.lead_in_samples;
    doc["data"] = blob.filename().string();
    doc["encoding"] = "float32-le-channel-major";
    write_json(json_path, doc);
}

TrialRecord load_trial(const fs::path& json_path) {
    const Json doc = read_json(json_path);
    std::string name = json_path.string();
    return guarded("trial " + name, [&] {
        if (doc.contains("trial_id")) name = doc.at("trial_id").get<std::string>();
        check_version(doc, "schema_version", kTrialSchemaVersion, "trial " + name);

        TrialRecord t;
        t.subject_id = doc.at("subject_id").get<std::string>();
        t.object_id = doc.value("object_id", std::string());
        t.trial_index = doc.value("trial_index", 1);
        t.session = session_from_name(doc.value("session", std::string("clockwise")));
        t.is_mvc = doc.value("is_mvc", false);
        t.grasp_label = doc.at("grasp_label").get<int>();
        t.sample_rate_hz = doc.at("sample_rate_hz").get<double>();
        t.lead_in_samples = doc.value("lead_in_samples", 0);
        const int channels = doc.at("channels").get<int>();
        const int samples = doc.at("samples").get<int>();
        if (channels < 1 || samples < 1) schema_error("trial " + name + ": channel and sample counts must be positive");
        if (doc.value("encoding", std::string("float32-le-channel-major")) != "float32-le-channel-major") {
            schema_error("trial " + name + ": unsupported encoding");
        }

        const fs::path blob = json_path.parent_path() / doc.at("data").get<std::string>();
        std::string bytes;
        try {
            bytes = read_text(blob);
        } catch (const Error&) {
            throw Error(ErrorKind::Io, "trial " + name + ": cannot open data file " + blob.string());
        }
        const std::size_t expected = static_cast<std::size_t>(channels) * static_cast<std::size_t>(samples) * 4;
        if (bytes.size() != expected) {
            parse_error("trial " + name + ": data file holds " + std::to_string(bytes.size()) + " bytes, expected " +
                        std::to_string(expected));
        }
        t.samples.resize(channels, samples);
        std::size_t off = 0;
        for (int c = 0; c < channels; ++c) {
            for (int n = 0; n < samples; ++n, off += 4) t.samples(c, n) = get_f32(bytes, off);
        }
        t.validate();
        if (t.trial_id() != name && doc.contains("trial_id")) {
            schema_error("trial " + name + ": id does not match its metadata (" + t.trial_id() + ")");
        }
        return t;
    });
}

// ---- manifests -----------------------------------------------------------

void save_manifest(const ManifestDoc& doc, const fs::path& path) {
    Json j;
    j["schema_version"] = kManifestSchemaVersion;
    j["subject_id"] = doc.subject_id;
    Json mvc = Json::object();
    if (doc.mvc.values) {
        mvc["values"] = std::vector<double>(doc.mvc.values->begin(), doc.mvc.values->end());
    } else if (!doc.mvc.trial_file.empty()) {
        mvc["trial"] = doc.mvc.trial_file;
    }
    j["mvc"] = mvc;
    j["trials"] = Json::array();
    for (const auto& e : doc.trials) {
        Json t;
        t["id"] = e.trial_id;
        t["file"] = e.file;
        if (!e.frames.empty()) t["frames"] = e.frames;
        j["trials"].push_back(t);
    }
    write_json(path, j);
}

ManifestDoc read_manifest_doc(const fs::path& path) {
    const Json j = read_json(path);
    return guarded("manifest " + path.string(), [&] {
        check_version(j, "schema_version", kManifestSchemaVersion, "manifest " + path.string());
        ManifestDoc doc;
        doc.subject_id = j.at("subject_id").get<std::string>();
        if (j.contains("mvc")) {
            const auto& m = j.at("mvc");
            if (m.contains("values")) {
                const auto v = m.at("values").get<std::vector<double>>();
                doc.mvc.values = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
            }
            if (m.contains("trial")) doc.mvc.trial_file = m.at("trial").get<std::string>();
        }
        for (const auto& t : j.value("trials", Json::array())) {
            ManifestEntry e;
            e.file = t.at("file").get<std::string>();
            e.trial_id = t.value("id", fs::path(e.file).stem().string());
            e.frames = t.value("frames", std::string());
            doc.trials.push_back(std::move(e));
        }
        return doc;
    });
}

Manifest load_manifest(const fs::path& path) {
    const ManifestDoc doc = read_manifest_doc(path);
    const fs::path dir = path.parent_path();
    Manifest out;
    out.subject_id = doc.subject_id;
    for (const auto& e : doc.trials) {
        const fs::path p = dir / e.file;
        if (!fs::exists(p)) throw Error(ErrorKind::Io, "trial " + e.trial_id + ": file " + p.string() + " not found");
        TrialRecord rec;
        try {
            rec = load_trial(p);
        } catch (const Error& err) {
            const std::string msg = err.what();
            // make sure the manifest's name for the trial is in the message
            throw Error(err.kind(), msg.find(e.trial_id) == std::string::npos ? "trial " + e.trial_id + ": " + msg : msg);
        }
        out.trials.push_back({std::move(rec), p, e.frames.empty() ? fs::path() : dir / e.frames});
    }
    if (doc.mvc.values) {
        MvcProfile mvc{doc.subject_id, *doc.mvc.values};
        try {
            mvc.validate();
        } catch (const Error& err) {
            schema_error(std::string("manifest ") + path.string() + ": " + err.what());
        }
        out.mvc = mvc;
    } else if (!doc.mvc.trial_file.empty()) {
        const TrialRecord mvc_trial = load_trial(dir / doc.mvc.trial_file);
        out.mvc = signal::compute_mvc(mvc_trial);
        out.mvc->subject_id = doc.subject_id;
    }
    return out;
}

// ---- posterior streams ---------------------------------------------------

void save_stream(const PosteriorStream& stream, const fs::path& path) {
    stream.validate();
    std::string out = "# source=" + std::string(source_name(stream.source)) + "\n";
    const int first = stream.size() ? stream.posteriors[0].first_label() : (stream.source == PosteriorStream::Source::Emg ? 0 : 1);
    out += posterior_header(first, kGraspLabels) + "\n";
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const auto& p = stream.posteriors[i];
        if (p.first_label() != first || p.last_label() != kGraspLabels) {
            fail("save_stream: posteriors must share one label range ending at 13");
        }
        out += format_double(stream.times_ms[i]);
        for (double v : p.probs()) out += "," + format_double(v);
        out += "\n";
    }
    write_text(path, out);
}

PosteriorStream load_stream(const fs::path& path) {
    const auto lines = read_lines(path);
    const std::string ctx = "stream " + path.string();
    PosteriorStream s;
    std::size_t i = 0;
    if (i < lines.size() && lines[i].rfind("# source=", 0) == 0) {
        s.source = source_from_name(lines[i].substr(9));
        ++i;
    }
    if (i >= lines.size()) parse_error(ctx + ": missing header");
    const auto header = split_csv(lines[i++]);
    if (header.size() < 2 || header[0] != "time_ms" || header[1].size() < 2 || header[1][0] != 'p') {
        parse_error(ctx + ": malformed header");
    }
    const int first = static_cast<int>(parse_double(header[1].substr(1), ctx));
    const std::size_t width = header.size() - 1;
    if (first + static_cast<int>(width) - 1 != kGraspLabels) parse_error(ctx + ": header must end at p13");
    for (; i < lines.size(); ++i) {
        const auto cells = split_csv(lines[i]);
        const std::string row_ctx = ctx + " line " + std::to_string(i + 1);
        if (cells.size() != header.size()) parse_error(row_ctx + ": expected " + std::to_string(header.size()) + " columns");
        s.times_ms.push_back(parse_double(cells[0], row_ctx));
        std::vector<double> probs(width);
        for (std::size_t k = 0; k < width; ++k) probs[k] = parse_double(cells[k + 1], row_ctx);
        s.posteriors.emplace_back(std::move(probs), first);
    }
    try {
        s.validate();
    } catch (const Error& e) {
        schema_error(ctx + ": " + e.what());
    }
    return s;
}

// ---- detection frames ----------------------------------------------------

void save_frames(const std::vector<DetectionFrame>& frames, const fs::path& path) {
    std::string out = "frame,time_ms,gaze_x,gaze_y,box,x,y,w,h";
    for (int l = 1; l <= kGraspLabels; ++l) out += ",p" + std::to_string(l);
    out += "\n";
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto& fr = frames[f];
        fr.validate();
        const std::string head = std::to_string(f) + "," + format_double(fr.time_ms) + "," +
                                 format_double(fr.gaze_x) + "," + format_double(fr.gaze_y);
        if (fr.boxes.empty()) {
            out += head + ",-1" + std::string(4 + kGraspLabels, ',') + "\n";
            continue;
        }
        for (std::size_t b = 0; b < fr.boxes.size(); ++b) {
            const auto& box = fr.boxes[b];
            out += head + "," + std::to_string(b) + "," + format_double(box.x) + "," + format_double(box.y) + "," +
                   format_double(box.w) + "," + format_double(box.h);
            for (double v : box.probs.probs()) out += "," + format_double(v);
            out += "\n";
        }
    }
    write_text(path, out);
}

std::vector<DetectionFrame> load_frames(const fs::path& path) {
    const auto lines = read_lines(path);
    const std::string ctx = "frames " + path.string();
    constexpr std::size_t kCols = 9 + kGraspLabels;
    if (lines.empty() || split_csv(lines[0]).size() != kCols || split_csv(lines[0])[0] != "frame") {
        parse_error(ctx + ": malformed header");
    }
    std::vector<DetectionFrame> frames;
    long current = -1;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv(lines[i]);
        const std::string row_ctx = ctx + " line " + std::to_string(i + 1);
        if (cells.size() != kCols) parse_error(row_ctx + ": expected " + std::to_string(kCols) + " columns");
        const long frame = std::lround(parse_double(cells[0], row_ctx));
        if (frame != current) {
            if (frame != current + 1) parse_error(row_ctx + ": frame indices must be consecutive");
            current = frame;
            DetectionFrame fr;
            fr.time_ms = parse_double(cells[1], row_ctx);
            fr.gaze_x = parse_double(cells[2], row_ctx);
            fr.gaze_y = parse_double(cells[3], row_ctx);
            frames.push_back(fr);
        }
        const long box = std::lround(parse_double(cells[4], row_ctx));
        if (box < 0) continue;
        if (box != static_cast<long>(frames.back().boxes.size())) parse_error(row_ctx + ": box indices must be consecutive");
        DetectionBox b;
        b.x = parse_double(cells[5], row_ctx);
        b.y = parse_double(cells[6], row_ctx);
        b.w = parse_double(cells[7], row_ctx);
        b.h = parse_double(cells[8], row_ctx);
        std::vector<double> probs(kGraspLabels);
        for (int k = 0; k < kGraspLabels; ++k) probs[static_cast<std::size_t>(k)] = parse_double(cells[9 + static_cast<std::size_t>(k)], row_ctx);
        b.probs = ClassPosterior(std::move(probs), 1);
        frames.back().boxes.push_back(std::move(b));
    }
    for (const auto& fr : frames) {
        try {
            fr.validate();
        } catch (const Error& e) {
            schema_error(ctx + ": " + e.what());
        }
    }
    return frames;
}

// ---- models --------------------------------------------------------------

Json model_to_json(const ModelArtifact& model) {
    const auto& f = model.forest;
    const auto& cfg = f.config();
    Json j;
    j["format_version"] = kModelFormatVersion;
    j["subject_id"] = model.subject_id;
    j["feature_dimension"] = f.dimension();
    j["class_count"] = f.class_count();
    j["training_config"] = {{"n_trees", cfg.n_trees},
                            {"min_samples_split", cfg.min_samples_split},
                            {"candidate_features_per_node", cfg.candidate_features_per_node},
                            {"seed", cfg.seed}};
    Json trees = Json::array();
    for (const auto& t : f.trees()) {
        Json nodes = Json::array();
        for (const auto& n : t.nodes()) nodes.push_back(Json::array({n.feature, n.threshold, n.left, n.right, n.leaf}));
        trees.push_back({{"nodes", nodes}, {"histograms", t.leaf_histograms()}});
    }
    j["trees"] = trees;
    return j;
}

ModelArtifact model_from_json(const Json& j) {
    return guarded("model", [&] {
        check_version(j, "format_version", kModelFormatVersion, "model");
        trees::ForestConfig cfg;
        const auto& tc = j.at("training_config");
        cfg.n_trees = tc.at("n_trees").get<int>();
        cfg.min_samples_split = tc.at("min_samples_split").get<int>();
        cfg.candidate_features_per_node = tc.at("candidate_features_per_node").get<int>();
        cfg.seed = tc.at("seed").get<std::uint64_t>();
        cfg.class_count = j.at("class_count").get<int>();
        const int dim = j.at("feature_dimension").get<int>();
        if (dim < 1 || cfg.class_count < 1) schema_error("model: dimension and class count must be positive");

        std::vector<trees::Tree> forest;
        for (const auto& t : j.at("trees")) {
            std::vector<trees::Node> nodes;
            for (const auto& n : t.at("nodes")) {
                if (n.size() != 5) schema_error("model: tree node must have 5 fields");
                nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<int>()});
            }
            trees::Tree tree(std::move(nodes), t.at("histograms").get<std::vector<std::vector<int>>>(), cfg.class_count);
            tree.validate(dim);
            forest.push_back(std::move(tree));
        }
        if (static_cast<int>(forest.size()) != cfg.n_trees) {
            schema_error("model: holds " + std::to_string(forest.size()) + " trees, config says " +
                         std::to_string(cfg.n_trees));
        }
        return ModelArtifact{j.value("subject_id", std::string()), trees::Forest(std::move(forest), dim, cfg)};
    });
}

void save_model(const ModelArtifact& model, const fs::path& path) { write_text(path, model_to_json(model).dump() + "\n"); }

ModelArtifact load_model(const fs::path& path) {
    const Json j = read_json(path);
    try {
        return model_from_json(j);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

// ---- segmentation --------------------------------------------------------

Json segmentation_to_json(const ggs::Segmentation& seg) {
    return {{"breakpoints", seg.breakpoints}, {"objective", seg.objective}, {"length", seg.length}};
}

ggs::Segmentation segmentation_from_json(const Json& j) {
    return guarded("segmentation", [&] {
        ggs::Segmentation s;
        s.breakpoints = j.at("breakpoints").get<std::vector<int>>();
        s.objective = j.at("objective").get<double>();
        s.length = j.at("length").get<int>();
        int prev = 0;
        for (int b : s.breakpoints) {
            if (b <= prev || b >= s.length) schema_error("segmentation: breakpoints must increase inside (0, length)");
            prev = b;
        }
        return s;
    });
}

// ---- plain numeric tables ------------------------------------------------

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return i;
    }
    throw Error(ErrorKind::Schema, "table has no column '" + std::string(name) + "'");
}

void save_table(const Table& table, const fs::path& path) {
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) out += (i ? "," : "") + table.columns[i];
    out += "\n";
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) fail("save_table: row width does not match the header");
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_double(row[i]);
        out += "\n";
    }
    write_text(path, out);
}

Table load_table(const fs::path& path) {
    const auto lines = read_lines(path);
    const std::string ctx = "table " + path.string();
    if (lines.empty()) parse_error(ctx + ": missing header");
    Table t;
    t.columns = split_csv(lines[0]);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv(lines[i]);
        const std::string row_ctx = ctx + " line " + std::to_string(i + 1);
        if (cells.size() != t.columns.size()) parse_error(row_ctx + ": wrong column count");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c, row_ctx));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace graspfuse::dataio
