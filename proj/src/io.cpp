#include "klaus/io.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace klaus {

static_assert(std::endian::native == std::endian::little, "snapshot writer assumes a little-endian host");

namespace {

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void write_comment_header(std::ostream& out, const Metadata& meta) {
  for (const auto& [k, v] : meta) out << "# " << k << ": " << v << "\n";
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

void write_snapshots(const std::string& path, const Metadata& meta, const Trajectory& traj) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  const Grid grid = traj.snapshots.empty() ? Grid{} : traj.snapshots.front().u.grid();
  std::ostringstream header;
  header << "klaus-snapshots d=" << grid.dim << " n=" << grid.n << " boundary=" << to_string(grid.boundary)
         << " fields=t,u,v";
  for (const auto& [k, v] : meta) header << " " << k << "=" << v;
  std::string h = header.str();
  for (char& c : h)
    if (c == '\n') c = ' ';
  out << h << "\n";
  for (const auto& s : traj.snapshots) {
    out.write(reinterpret_cast<const char*>(&s.t), sizeof(double));
    out.write(reinterpret_cast<const char*>(s.u.data()), static_cast<std::streamsize>(s.u.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(s.v.data()), static_cast<std::streamsize>(s.v.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

SnapshotFile read_snapshots(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  SnapshotFile f;
  std::getline(in, f.header);
  std::istringstream hs(f.header);
  std::string tok;
  hs >> tok;
  if (tok != "klaus-snapshots") throw std::runtime_error(path + " is not a snapshot file");
  while (hs >> tok) {
    if (tok.rfind("d=", 0) == 0) f.dim = std::stoi(tok.substr(2));
    else if (tok.rfind("n=", 0) == 0) f.n = std::stoi(tok.substr(2));
    else if (tok.rfind("boundary=", 0) == 0) f.boundary = tok.substr(9);
  }
  if (f.dim < 1 || f.n < 1) throw std::runtime_error(path + ": header lacks d or n");
  std::size_t size = 1;
  for (int a = 0; a < f.dim; ++a) size *= static_cast<std::size_t>(f.n);
  while (true) {
    double t = 0.0;
    if (!in.read(reinterpret_cast<char*>(&t), sizeof t)) break;
    std::vector<double> u(size), v(size);
    in.read(reinterpret_cast<char*>(u.data()), static_cast<std::streamsize>(size * sizeof(double)));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(size * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated snapshot record");
    f.times.push_back(t);
    f.u.push_back(std::move(u));
    f.v.push_back(std::move(v));
  }
  return f;
}

void write_norms(const std::string& path, const Metadata& meta, const std::vector<StepRecord>& records) {
  auto out = open_out(path);
  write_comment_header(out, meta);
  out << "time,u_l2,u_lgamma,v_hrho,min_u,min_v,h\n";
  for (const auto& r : records) {
    out << format_double(r.t) << ',' << format_double(r.u_l2) << ',' << format_double(r.u_lgamma) << ','
        << format_double(r.v_hrho) << ',' << format_double(r.u_min) << ',' << format_double(r.v_min) << ','
        << format_double(r.h) << '\n';
  }
}

void write_ladder(const std::string& path, const Metadata& meta, const std::vector<RungReport>& ladder) {
  auto out = open_out(path);
  write_comment_header(out, meta);
  out << "rung,kappa,exit_time,picard_iterations,residual\n";
  for (const auto& r : ladder) {
    out << r.rung << ',' << format_double(r.kappa) << ','
        << (r.exit_time ? format_double(*r.exit_time) : std::string("none")) << ',' << r.picard_iterations << ','
        << format_double(r.residual) << '\n';
  }
}

void write_report(const std::string& path, const Metadata& meta, const Metadata& body) {
  auto out = open_out(path);
  write_comment_header(out, meta);
  for (const auto& [k, v] : body) out << k << ": " << v << "\n";
}

}  // namespace klaus
