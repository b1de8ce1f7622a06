#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspfuse/common.hpp"
#include "graspfuse/ggs.hpp"
#include "graspfuse/trees.hpp"
#include "graspfuse/trial.hpp"

namespace graspfuse::dataio {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr int kTrialSchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kModelFormatVersion = 1;

std::string read_text(const fs::path& path);
/// Creates parent directories as needed.
void write_text(const fs::path& path, const std::string& text);

/// Parse errors come back as Error(Parse) naming the file.
Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& value);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);
/// Whole-string strtod; Error(Parse) on trailing junk or empty input.
double parse_double(std::string_view text, const std::string& context);

// ---- trials --------------------------------------------------------------

/// Writes `<json_path>` (sidecar) and the float32 blob next to it, named
/// after the sidecar with a .f32 extension. Samples are rounded to float32.
void save_trial(const TrialRecord& trial, const fs::path& json_path);

/// Reads a sidecar and its blob, then validates the record. Every failure
/// names the trial.
TrialRecord load_trial(const fs::path& json_path);

// ---- manifests -----------------------------------------------------------

struct ManifestEntry {
    std::string trial_id;
    std::string file;    // relative to the manifest
    std::string frames;  // optional detection-frame CSV, relative; may be empty
};

/// Either explicit per-channel MVC values or a reference to an MVC trial.
struct ManifestMvc {
    std::optional<Vector> values;
    std::string trial_file;
};

struct ManifestDoc {
    std::string subject_id;
    std::vector<ManifestEntry> trials;
    ManifestMvc mvc;
};

struct LoadedTrial {
    TrialRecord record;
    fs::path path;
    fs::path frames_path;  // empty when the manifest names none
};

struct Manifest {
    std::string subject_id;
    std::vector<LoadedTrial> trials;
    std::optional<MvcProfile> mvc;
};

void save_manifest(const ManifestDoc& doc, const fs::path& path);
ManifestDoc read_manifest_doc(const fs::path& path);

/// Parses the manifest and every trial it references. An MVC trial
/// reference is resolved into a profile with the default filter.
Manifest load_manifest(const fs::path& path);

// ---- posterior streams ---------------------------------------------------

/// CSV: "# source=<name>" comment, header time_ms,p<first>..p<last>, one row
/// per decision instant.
void save_stream(const PosteriorStream& stream, const fs::path& path);
PosteriorStream load_stream(const fs::path& path);

// ---- detection frames ----------------------------------------------------

/// CSV with one row per box: frame,time_ms,gaze_x,gaze_y,box,x,y,w,h,p1..p13.
/// Frames without boxes get one row with box = -1 and empty box fields.
void save_frames(const std::vector<DetectionFrame>& frames, const fs::path& path);
std::vector<DetectionFrame> load_frames(const fs::path& path);

// ---- models --------------------------------------------------------------

struct ModelArtifact {
    std::string subject_id;
    trees::Forest forest;
};

void save_model(const ModelArtifact& model, const fs::path& path);
/// Rejects a format_version other than kModelFormatVersion with
/// Error(Version) naming both versions; never returns a partial model.
ModelArtifact load_model(const fs::path& path);

Json model_to_json(const ModelArtifact& model);
ModelArtifact model_from_json(const Json& doc);

// ---- segmentation --------------------------------------------------------

Json segmentation_to_json(const ggs::Segmentation& seg);
ggs::Segmentation segmentation_from_json(const Json& doc);

// ---- plain numeric tables ------------------------------------------------

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(std::string_view name) const;
};

void save_table(const Table& table, const fs::path& path);
Table load_table(const fs::path& path);

}  // namespace graspfuse::dataio
