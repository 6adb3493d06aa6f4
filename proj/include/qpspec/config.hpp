#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpspec/model.hpp"
#include "qpspec/verify.hpp"

namespace qpspec::config {

inline constexpr const char* kVersion = "0.1.0";

struct CheckSpec {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
};

struct EnergyGrid {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 1;

  std::vector<double> points() const;
};

struct ExperimentConfig {
  // "golden", "sqrt2", "pi", "liouville:<beta>:<terms>" or a decimal
  std::string frequency = "golden";
  std::size_t depth = 40;
  model::PotentialSpec potential;
  double x = 0.0;
  std::optional<double> energy;
  std::optional<EnergyGrid> energy_grid;
  std::vector<CheckSpec> checks;
  std::optional<verify::ScanConfig> scan;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
  unsigned precision_bits = 256;
  // 0 keeps the OpenMP default
  int workers = 0;
  std::int64_t lyapunov_n = 10000;
  std::size_t lyapunov_phases = 32;

  // validated document with defaults filled in
  nlohmann::json canonical;
  std::string hash;

  std::vector<double> energies() const;
};

/// Check names accepted in "checks".
const std::vector<std::string>& check_names();

/// Validates every field; unknown keys and bad values raise ConfigError naming the field.
ExperimentConfig parse(const nlohmann::json& doc);
/// Reads a JSON file; syntax errors report the line.
ExperimentConfig load(const std::string& path);

/// "sawtooth:<gamma>" (centered), "cosine:<lambda>", "tangent:<lambda>", "free",
/// "table:<csv path>" or an inline JSON object.
model::PotentialSpec parse_potential(const std::string& text);

/// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string hash_of(const nlohmann::json& j);
/// "# qpspec <version> config <hash>"
std::string header_line(const std::string& hash);

struct RunSummary {
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  std::size_t errors = 0;
  std::size_t scan_rows = 0;
  // 0 ok, 1 check failure, 3 numeric error
  int exit_code = 0;
};

/// Report lines (a metadata line first) for every check at every energy.
RunSummary run_checks(const ExperimentConfig& cfg, std::ostream& reports);

/// Runs every check at every energy, then the scan. Writes reports.jsonl and
/// scan.csv under output_dir.
RunSummary run(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace qpspec::config
