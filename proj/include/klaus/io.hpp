#pragma once

#include <string>
#include <utility>
#include <vector>

#include "klaus/dynamics.hpp"
#include "klaus/fixedpoint.hpp"

namespace klaus {

/// Ordered key: value pairs; every output file starts with them as comments.
using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Shortest text that parses back to the same double.
std::string format_double(double x);

/// One text header line, then per snapshot little-endian float64 records
/// [t][u, n^d values][v, n^d values].
void write_snapshots(const std::string& path, const Metadata& meta, const Trajectory& traj);

struct SnapshotFile {
  std::string header;
  int dim = 0;
  int n = 0;
  std::string boundary;
  std::vector<double> times;
  std::vector<std::vector<double>> u, v;
};
SnapshotFile read_snapshots(const std::string& path);

/// Comma-separated norm series: time, u_l2, u_lgamma, v_hrho, min_u, min_v, h.
void write_norms(const std::string& path, const Metadata& meta, const std::vector<StepRecord>& records);

/// Comma-separated ladder: rung, kappa, exit_time (or none), picard_iterations, residual.
void write_ladder(const std::string& path, const Metadata& meta, const std::vector<RungReport>& ladder);

/// key: value lines.
void write_report(const std::string& path, const Metadata& meta, const Metadata& body);

}  // namespace klaus
