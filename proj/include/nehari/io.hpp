#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nehari/experiments.hpp"
#include "nehari/graph.hpp"
#include "nehari/nonlinearity.hpp"
#include "nehari/solver.hpp"
#include "nehari/spectral.hpp"

namespace nehari {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::json;

/// Malformed input files. The message carries line and column when known.
class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// Parses JSON text; syntax errors become ParseError("<origin>:<line>:<column>: ...").
Json parse_json(const std::string& text, const std::string& origin);

// ---------------------------------------------------------------------------
// Graph files
//
// {"vertices": [{"id": 0, "m": 1.0, "c": 0.0}, {"id": "a", "m": 2.0, "V": 3.0}],
//  "edges":    [{"u": 0, "v": "a", "b": 1.5}]}
//
// An edge entry sets b(u,v) and mirrors b(v,u) unless (v,u) is listed as well.

WeightedGraph graph_from_json(const Json& doc);
WeightedGraph parse_graph(const std::string& text, const std::string& origin = "<graph>");
WeightedGraph load_graph(const std::filesystem::path& path);
/// Stores c rather than V so that parse(serialize(g)) == g exactly.
Json graph_to_json(const WeightedGraph& g);

/// {"type": "power", "p": 4, "g": 1.0 | [g per vertex]}
Nonlinearity nonlinearity_from_json(const Json& doc, std::size_t n);

// ---------------------------------------------------------------------------
// Run and sweep configurations. Relative graph paths resolve against `base`.

struct GraphSource {
    WeightedGraph graph;
    /// Empty for an inline graph.
    std::optional<std::filesystem::path> path;
};

struct RunConfig {
    GraphSource graph;
    Json nonlinearity;
    SolverConfig solver;
    EigenOptions eigen;
};

struct SweepConfig {
    GraphSource graph;
    Json nonlinearity;
    int kappa = 1;
    std::size_t target_k = 1;
    Side side = Side::Below;
    SweepOptions options;
};

RunConfig run_config_from_json(const Json& doc, const std::filesystem::path& base);
SweepConfig sweep_config_from_json(const Json& doc, const std::filesystem::path& base);

/// Canonical configuration with defaults filled in and the graph inlined;
/// its digest is the manifest's config hash.
Json effective_json(const RunConfig& cfg);
Json effective_json(const SweepConfig& cfg);

// ---------------------------------------------------------------------------
// Results

Json spectrum_to_json(const SpectralData& spec, const WeightedGraph& g);
Json result_to_json(const GroundStateResult& result, const WeightedGraph& g,
                    const std::optional<CriticalValueReport>& bounds);
Json sweep_to_json(const SweepResult& sweep);
/// Columns lambda, delta, norm_E, norm_lp, energy, resid, status.
std::string sweep_to_csv(const SweepResult& sweep);
/// "delta norm_E" pairs of converged rows for a log-log plot.
std::string sweep_plot_data(const SweepResult& sweep);
Json audit_to_json(const AuditReport& report);

/// Pretty-printed with a trailing newline.
std::string dump(const Json& doc);

// ---------------------------------------------------------------------------
// Manifests

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string tool = "nehari";
    std::string version = kVersion;
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string started;
    std::string finished;
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
};

/// UTC, ISO 8601.
std::string utc_timestamp();

Json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const Json& doc);

/// Recomputes every digest; returns one message per missing or altered file.
std::vector<std::string> verify_manifest(const RunManifest& m);

}  // namespace nehari
