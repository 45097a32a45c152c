#include <algorithm>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "klaus/app.hpp"
#include "klaus/config.hpp"
#include "klaus/diagnostics.hpp"

namespace py = pybind11;
using namespace klaus;

namespace {

RunConfig load(const std::string& text, const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed) {
  RunConfig cfg = parse_config(text, overrides);
  resolve_seed(cfg, seed, config_sets_seed(text, overrides));
  return cfg;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<double> stack(const std::vector<CoupledState>& snaps, bool take_u) {
  const std::size_t rows = snaps.size();
  const std::size_t cols = rows == 0 ? 0 : snaps.front().u.size();
  py::array_t<double> out({rows, cols});
  auto a = out.mutable_unchecked<2>();
  for (std::size_t r = 0; r < rows; ++r) {
    const Field& f = take_u ? snaps[r].u : snaps[r].v;
    for (std::size_t c = 0; c < cols; ++c) a(r, c) = f[c];
  }
  return out;
}

py::dict simulate(const std::string& text, const std::vector<std::string>& overrides,
                  std::optional<std::uint64_t> seed) {
  const RunConfig cfg = load(text, overrides, seed);
  const SpectralBasis basis = SpectralBasis::full(cfg.grid);
  const Scenario sc = make_scenario(cfg, basis);
  Stepper stepper = sc.make_stepper();
  const NoisePath noise(cfg.noise, basis, cfg.solver.dt);
  const PathMode mode = cfg.run.mode == "decoupled" ? PathMode::decoupled : PathMode::coupled;
  Trajectory traj;
  {
    py::gil_scoped_release release;
    traj = simulate_path(sc.u0, sc.v0, stepper, noise, mode, sc.monitor);
  }
  std::vector<double> t, u_l2, h;
  for (const auto& r : traj.records) {
    t.push_back(r.t);
    u_l2.push_back(r.u_l2);
    h.push_back(r.h);
  }
  py::dict d;
  d["t"] = to_array(t);
  d["u"] = stack(traj.snapshots, true);
  d["v"] = stack(traj.snapshots, false);
  d["u_l2"] = to_array(u_l2);
  d["h"] = to_array(h);
  d["seed"] = cfg.seed;
  return d;
}

py::dict run(const std::string& text, const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed,
             const std::optional<std::string>& out_dir) {
  RunConfig cfg = load(text, overrides, seed);
  if (out_dir) cfg.output_dir = *out_dir;
  RunOutcome o;
  {
    py::gil_scoped_release release;
    o = run_experiment(cfg);
  }
  py::dict d;
  d["status"] = o.status;
  d["summary"] = o.summary;
  d["files"] = o.files;
  return d;
}

py::list validate(const py::dict& overrides) {
  HypothesisParams p;
  for (const auto& [key, value] : overrides) {
    const std::string k = py::str(key);
    const double v = value.cast<double>();
    if (k == "d") p.d = static_cast<int>(v);
    else if (k == "gamma") p.gamma = v;
    else if (k == "m") p.m = v;
    else if (k == "m0") p.m0 = v;
    else if (k == "p_star") p.p_star = v;
    else if (k == "p0_star") p.p0_star = v;
    else if (k == "rho") p.rho = v;
    else if (k == "l") p.l = v;
    else if (k == "delta0") p.delta0 = v;
    else throw py::key_error("unknown hypothesis parameter '" + k + "'");
  }
  py::list out;
  for (const auto& c : validate_hypotheses(p).clauses) {
    py::dict d;
    d["id"] = c.id;
    d["group"] = c.group;
    d["statement"] = c.statement;
    d["pass"] = c.pass;
    d["slack"] = c.slack;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stochastic Klausmeier simulator";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("default_config", [] { return emit_config(RunConfig{}); }, "Full default config as JSON text.");
  m.def(
      "resolve_config",
      [](const std::string& text, const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed) {
        return emit_config(load(text, overrides, seed));
      },
      py::arg("text") = "", py::arg("overrides") = std::vector<std::string>{}, py::arg("seed") = py::none(),
      "Parses, applies overrides and seed precedence, and re-emits the config.");
  m.def("simulate", &simulate, py::arg("text") = "", py::arg("overrides") = std::vector<std::string>{},
        py::arg("seed") = py::none(), "Runs one path and returns its snapshots and norm series.");
  m.def("run", &run, py::arg("text") = "", py::arg("overrides") = std::vector<std::string>{},
        py::arg("seed") = py::none(), py::arg("out_dir") = py::none(),
        "Runs the configured experiment and writes its output files.");
  m.def("validate_hypotheses", &validate, py::arg("params") = py::dict(),
        "Clause-by-clause check of the hypothesis index set.");
  m.def("pm_inequality_gap", &pm_inequality_gap, py::arg("x"), py::arg("y"), py::arg("gamma"));
  m.def("cutoff_phi", &cutoff_phi, py::arg("x"), py::arg("kappa"));
  m.def(
      "eigenvalues",
      [](int dim, const std::string& boundary, int n) {
        const auto b = SpectralBasis::full(Grid{dim, n, boundary_from_string(boundary)});
        const auto ev = b.eigenvalues();
        return std::vector<double>(ev.begin(), ev.end());
      },
      py::arg("dim"), py::arg("boundary"), py::arg("n"));
}
