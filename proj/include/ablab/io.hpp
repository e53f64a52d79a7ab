#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ablab/electric_ab.hpp"
#include "ablab/flux_recovery.hpp"
#include "ablab/go_engine.hpp"
#include "ablab/tdse.hpp"

namespace ablab::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

/// Throws ConfigError unless `j` is a two-element numeric array.
Vec2 vec2_from_json(const Json& j, const std::string& what);
Json to_json(const Vec2& v);

/// {obstacles: [{center: [x, y], radius, flux}], bound: {min: [x, y], max: [x, y]}}
Scene scene_from_json(const Json& j);
Json to_json(const Scene& scene);
Scene load_scene(const fs::path& path);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& j);

enum class FieldKind { Density, ComplexInterleaved };

struct FieldDump {
    int nx{0};
    int ny{0};
    double spacing{0.0};
    Vec2 origin;
    double time{0.0};
    FieldKind kind{FieldKind::Density};
    std::vector<double> data;  ///< row-major, x fastest; interleaved re/im for complex dumps
};

/// Writes `<stem>.bin` (little-endian f64) and `<stem>.json`; returns both paths.
std::vector<fs::path> write_field(const fs::path& stem, const FieldDump& dump);
FieldDump read_field(const fs::path& stem);
FieldDump density_dump(const LatticeSpec& spec, const Field& field);
FieldDump complex_dump(const LatticeSpec& spec, const Field& field);

/// CSV with header `step,time,probe_name,value`.
void write_probes(const fs::path& path, const std::vector<ProbeRecord>& records);

Json to_json(const GOPrediction& p);
Json to_json(const FluxSystem& system);
Json to_json(const FluxEstimate& estimate);
Json to_json(const Circuit& circuit);
/// {N: [[...]], betas: [{phase: v} | {intensity: v}], noise_bound?}
FluxSystem flux_system_from_json(const Json& j);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

/// Run record: config echo (with defaults filled in), outputs and their checksums.
class Manifest {
public:
    Manifest(std::string mode, Json resolved_config);

    void add_output(const fs::path& path);
    void set_config(Json resolved_config) { config_ = std::move(resolved_config); }
    void set_result(Json result) { result_ = std::move(result); }
    /// Writes `manifest.json` into `dir`; wall time runs from construction.
    fs::path write(const fs::path& dir) const;

private:
    std::string mode_;
    Json config_;
    Json result_;
    std::vector<fs::path> outputs_;
    std::chrono::steady_clock::time_point start_;
};

std::string version();

}  // namespace ablab::io
