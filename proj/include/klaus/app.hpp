#pragma once

#include <string>
#include <vector>

#include "klaus/config.hpp"
#include "klaus/io.hpp"

namespace klaus {

struct RunOutcome {
  int status = 0;  // 0 ok, 1 invariant breach or solver failure, 2 refused
  std::string summary;
  std::vector<std::string> files;
};

/// Runs cfg.experiment and writes its artifacts into cfg.output_dir (created
/// if missing). Failures leave failure.txt with status, kind and message.
RunOutcome run_experiment(const RunConfig& cfg);

/// Metadata header shared by every output file of a run.
Metadata run_metadata(const RunConfig& cfg);

/// Builds the common per-path scenario from a config.
Scenario make_scenario(const RunConfig& cfg, const SpectralBasis& basis);

}  // namespace klaus
