#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "compre/ablation.hpp"
#include "json.hpp"

namespace compre {

// Fixed-point formatting independent of the global locale.
std::string format_fixed(double value, int decimals);

// tau,accuracy,n with accuracy as a fraction to 3 decimals.
void write_curve_csv(const AblationCurve& curve, std::ostream& out);
void emit_curve_csv(const AblationCurve& curve, const std::filesystem::path& path);

struct PositionalColumn {
  std::string name;  // corpus or transcript kind, e.g. "manual", "asr"
  std::vector<PositionalRow> rows;
};

// Rows beginning, random, end; one percentage column per input column.
void write_positional_table(std::span<const PositionalColumn> columns, std::ostream& out);
void emit_positional_table(std::span<const PositionalColumn> columns, const std::filesystem::path& path);

// corpus,Standard,Context-free,Random,effective_options,n (percentages).
void write_world_knowledge_csv(const WorldKnowledgeReport& report, std::ostream& out);
void emit_world_knowledge_csv(const WorldKnowledgeReport& report, const std::filesystem::path& path);

// id,label,tau_star,unanswered
void write_labels_csv(std::span<const QuestionLabel> labels, std::ostream& out);

// Minimal line chart of accuracy against tau, one polyline per curve.
std::string render_curve_svg(std::span<const AblationCurve> curves, double random_baseline = -1.0);

// "fnv1a64:<16 hex digits>" of the file's bytes.
std::string fingerprint_file(const std::filesystem::path& path);

struct CorpusFingerprint {
  std::string path;
  std::string fingerprint;
};

// Everything needed to re-run a command and reproduce its outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::vector<CorpusFingerprint> corpora;
  std::vector<std::string> scorers;
  std::vector<std::uint64_t> seeds;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> artifacts;
};

nlohmann::ordered_json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);
void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

std::string utc_timestamp();

}  // namespace compre
