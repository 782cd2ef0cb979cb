#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsa/control_design.hpp"
#include "dsa/sim.hpp"

namespace dsa {

using Json = nlohmann::ordered_json;

// A configuration problem, tagged with the offending field (dotted path) or
// the input line for syntax errors.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string field, const std::string& what)
      : InvalidArgument(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  // geometry
  int cells = 16;
  double d0 = 0.25;
  std::vector<int> gaps{4, 4, 4, 4};
  int particles = 8;

  std::string pattern = "0111001100100101";
  double sigma = 0.45;
  std::string model = "continuous";  // continuous | discrete | both
  double epsilon = 0.01;             // terminal-constraint level; reported, not enforced

  // optimizer
  int restarts = 8;
  double u_max = 50.0;
  double u_min = 0.05;
  int objective_samples = 8192;
  int final_samples = 200000;
  int max_evaluations = 1500;
  double saturation = 0.999;
  bool warm_start = true;
  int max_interior = 4;

  // simulation
  double dt = 1e-4;
  int trials = 2000;
  double min_gap = 0.02;
  double discrete_max_duration = 1000.0;

  std::uint64_t seed = 1;
  std::optional<ActivationSequence> sequence;
  std::optional<int> n_min;

  bool operator==(const RunConfig&) const = default;

  Geometry geometry() const;
  Pattern target() const;
  NoiseParams noise() const;
  DesignOptions design_options() const;
  SimOptions sim_options() const;
};

// Sub-seeds derived from the top-level seed: derive_seed(seed, stream).
enum class SeedStream : std::uint64_t { Design = 1, Continuous = 2, Discrete = 3, Simulate = 4 };
std::uint64_t sub_seed(const RunConfig& cfg, SeedStream s);

RunConfig parse_config(const Json& j);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
Json to_json(const RunConfig& cfg);

// FNV-1a of the canonical config dump, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

Json to_json(const ProbEstimate& p);
Json to_json(const Composition& nu);
Json to_json(const Schedule& s);
Schedule schedule_from_json(const Json& j);

// Accepts a bare schedule or a report holding one under "schedule".
// Throws ConfigError("schedule", ...) if the geometry or pattern differ from cfg.
Schedule load_schedule(const std::string& path, const RunConfig& cfg);

std::string tool_version();

// Report skeleton: tool, version, config echo, hash, seeds.
Json report_header(const RunConfig& cfg);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace dsa
