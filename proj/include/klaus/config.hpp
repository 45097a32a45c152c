#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "klaus/cutoff.hpp"
#include "klaus/diagnostics.hpp"
#include "klaus/dynamics.hpp"
#include "klaus/field.hpp"
#include "klaus/noise.hpp"

namespace klaus {

/// Named initial condition. Presets:
///   constant               value
///   bump                   base + amplitude * smooth compact bump of radius width at center
///   perturbed-homogeneous  value + perturbation * psi_mode
///   file                   whitespace-separated n^d values read from path
struct InitialSpec {
  std::string preset = "bump";
  double value = 0.0;
  double amplitude = 1.0;
  double center = 0.5;
  double width = 0.25;
  double base = 0.0;
  double perturbation = 1e-3;
  int mode = 1;
  std::string path;

  bool operator==(const InitialSpec&) const = default;
};

/// Experiment-specific knobs.
struct RunParams {
  std::size_t paths = 100;
  double picard_tol = 1e-10;
  int picard_max_iter = 60;
  double moment_p = 1.0;
  std::string mode = "coupled";  // simulate: coupled or decoupled
  double uniqueness_tol = 1e-6;
  std::vector<double> exit_kappas{1.0, 2.0, 4.0, 8.0};

  bool operator==(const RunParams&) const = default;
};

enum class SeedSource { flag, config, environment, fallback };
std::string to_string(SeedSource s);

struct RunConfig {
  std::string experiment = "simulate";
  std::string output_dir = "out";
  std::uint64_t seed = 20240613;
  SeedSource seed_source = SeedSource::fallback;
  Grid grid{1, 64, Boundary::periodic};
  ModelConfig model;
  SolverConfig solver;
  unsigned workers = 0;  // 0 = available parallelism
  NoiseSpec noise;
  HypothesisParams hypothesis;  // d and gamma mirror grid.dim and model.gamma
  CutoffParams cutoff;          // gamma, m, m0, p0_star mirror the hypothesis set
  std::vector<double> ladder{1.0, 2.0, 4.0, 8.0};
  InitialSpec initial_u;
  InitialSpec initial_v;
  RunParams run;

  bool operator==(const RunConfig& o) const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the JSON config text. Missing keys take defaults; unknown keys,
/// bad types and malformed text raise ConfigError (syntax errors carry the
/// line number). Overrides "a.b.c=value" are applied to the document first;
/// values parse as JSON when possible and as strings otherwise.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});

/// Full config with every default written out.
std::string emit_config(const RunConfig& cfg, bool pretty = true);

/// Applies seed precedence: flag, then a seed key in the config, then the
/// KLAUS_SEED environment variable, then the built-in default.
void resolve_seed(RunConfig& cfg, std::optional<std::uint64_t> flag, bool config_has_seed);

/// True when the JSON document has a top-level seed key.
bool config_sets_seed(const std::string& text, const std::vector<std::string>& overrides = {});

/// Grid samples of an initial condition.
Field make_initial(const InitialSpec& spec, const SpectralBasis& basis);

}  // namespace klaus
