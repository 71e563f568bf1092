#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "dirlab/core.hpp"

namespace dirlab {

/// Invalid configuration; the message names the field and, when known, the line.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class ExperimentKind { spectrum, smalldev, heatcontent, dilation_check, contraction, kernel_bounds };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);
const std::vector<std::string>& experiment_kinds();

/// Declarative run description. Sections are JSON objects; unknown fields are
/// rejected and missing ones take documented defaults (see README).
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::spectrum;
  std::uint64_t seed = 1;
  std::string output_dir;
  nlohmann::json space;
  nlohmann::json domain;
  nlohmann::json mesh;
  nlohmann::json mc;
  nlohmann::json dilation;
  nlohmann::json bounds;
  nlohmann::json contraction;

  /// Fully resolved record; parsing it again yields the same config.
  nlohmann::json to_json() const;
};

/// Parses and validates a config text. Throws ConfigError with line/column
/// (syntax) or field/line (schema) diagnostics.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(const std::vector<std::string>& row);
  std::string csv() const;
  static Table parse_csv(const std::string& text);
};

/// Number formatting used in every output: shortest round-trip form, "nan", "inf".
std::string fmt(double v);
std::string fmt(std::uint64_t v);
std::string fmt(int v);

struct Audit {
  std::string name;
  std::string status;  // pass, fail, skipped
  bool hard = true;
  std::string detail;
};

struct RunResult {
  ExperimentKind kind = ExperimentKind::spectrum;
  Table results;
  std::map<std::string, Table> extra;  // written as <name>.csv
  std::vector<Audit> audits;
  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json resolved;

  bool hard_pass() const;
  nlohmann::json report() const;
};

RunResult run_experiment(const ExperimentConfig& cfg);

/// results.csv, report.json, resolved_config.json and the extra tables.
void write_outputs(const RunResult& r, const std::filesystem::path& dir);

struct CellDiff {
  std::string column;
  std::size_t row;
  double a;
  double b;
  double relative;  // |a − b| / max(|a|, |b|), or |a − b| / (3·joint CI) for MC columns
  bool exceeds;
};

struct CompareResult {
  std::string kind;
  double tolerance;
  std::vector<CellDiff> diffs;  // nonzero differences only
  bool within;
};

/// Default relative tolerance per kind for compare.
double compare_tolerance(ExperimentKind k);

/// Column-wise comparison of two run directories of the same kind. Columns with
/// a companion "<name>_ci95" column are compared against 3× the joint CI.
/// Throws ConfigError on a kind or schema mismatch.
CompareResult compare_runs(const std::filesystem::path& a, const std::filesystem::path& b, double tolerance = -1.0);

}  // namespace dirlab
