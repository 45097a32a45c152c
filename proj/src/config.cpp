#include "klaus/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "klaus/basis.hpp"

namespace klaus {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that the
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + where() + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for '" + name(key) + "': " + it->dump());
    }
  }

  void get_number(const char* key, double& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_number()) throw ConfigError("'" + name(key) + "' must be a number, got " + it->dump());
    out = it->get<double>();
  }

  template <typename Fn>
  void child(const char* key, Fn&& fn) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    Section s(*it, name(key));
    fn(s);
    s.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + name(it.key()) + "'");
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E>
E enum_from(const std::string& s, const std::vector<std::pair<const char*, E>>& table, const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  std::string opts;
  for (const auto& [name, value] : table) opts += (opts.empty() ? "" : ", ") + std::string(name);
  throw ConfigError(std::string("unknown ") + what + " '" + s + "' (expected " + opts + ")");
}

const std::vector<std::pair<const char*, Calculus>> kCalculus{{"ito", Calculus::ito},
                                                              {"stratonovich", Calculus::stratonovich}};
const std::vector<std::pair<const char*, NonnegPolicy>> kPolicy{{"monitor", NonnegPolicy::monitor},
                                                                {"project", NonnegPolicy::project}};

template <typename E>
std::string enum_name(E v, const std::vector<std::pair<const char*, E>>& table) {
  for (const auto& [name, value] : table)
    if (v == value) return name;
  return "?";
}

const std::set<std::string> kExperiments{"simulate",   "picard",   "glue",           "ensemble",
                                         "uniqueness", "validate", "noise-selftest", "pattern-demo"};
const std::set<std::string> kPresets{"constant", "bump", "perturbed-homogeneous", "file"};

void read_initial(Section& s, InitialSpec& in) {
  s.get("preset", in.preset);
  s.get_number("value", in.value);
  s.get_number("amplitude", in.amplitude);
  s.get_number("center", in.center);
  s.get_number("width", in.width);
  s.get_number("base", in.base);
  s.get_number("perturbation", in.perturbation);
  s.get("mode", in.mode);
  s.get("path", in.path);
  if (!kPresets.count(in.preset)) throw ConfigError("unknown initial-condition preset '" + in.preset + "'");
}

json initial_json(const InitialSpec& in) {
  return {{"preset", in.preset}, {"value", in.value},     {"amplitude", in.amplitude},
          {"center", in.center}, {"width", in.width},     {"base", in.base},
          {"perturbation", in.perturbation}, {"mode", in.mode}, {"path", in.path}};
}

void read_channel(Section& s, ChannelSpec& c) {
  s.get_number("decay", c.decay);
  s.get_number("amplitude", c.amplitude);
  s.get("spectrum", c.spectrum);
}

json channel_json(const ChannelSpec& c) {
  return {{"decay", c.decay}, {"amplitude", c.amplitude}, {"spectrum", c.spectrum}};
}

void apply_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "' is not key.path=value");
  const std::string path = spec.substr(0, eq);
  const std::string text = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + spec + "' has an empty key segment");
    if (!node->is_object()) throw ConfigError("override '" + spec + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

json load_document(const std::string& text, const std::vector<std::string>& overrides) {
  json doc;
  const bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
  if (blank) {
    doc = json::object();
  } else {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config syntax error: ") + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return doc;
}

}  // namespace

std::string to_string(SeedSource s) {
  switch (s) {
    case SeedSource::flag: return "flag";
    case SeedSource::config: return "config";
    case SeedSource::environment: return "environment";
    case SeedSource::fallback: return "default";
  }
  return "?";
}

bool RunConfig::operator==(const RunConfig& o) const {
  return experiment == o.experiment && output_dir == o.output_dir && seed == o.seed && grid == o.grid &&
         model == o.model && solver == o.solver && workers == o.workers && noise == o.noise &&
         hypothesis == o.hypothesis && cutoff == o.cutoff && ladder == o.ladder &&
         initial_u == o.initial_u && initial_v == o.initial_v && run == o.run;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  const json doc = load_document(text, overrides);
  RunConfig cfg;
  Section root(doc, "");
  root.get("experiment", cfg.experiment);
  if (!kExperiments.count(cfg.experiment)) throw ConfigError("unknown experiment '" + cfg.experiment + "'");
  root.get("output_dir", cfg.output_dir);
  root.get("seed", cfg.seed);
  if (doc.contains("seed")) cfg.seed_source = SeedSource::config;

  root.child("grid", [&](Section& s) {
    s.get("dim", cfg.grid.dim);
    s.get("n", cfg.grid.n);
    std::string b = to_string(cfg.grid.boundary);
    s.get("boundary", b);
    try {
      cfg.grid.boundary = boundary_from_string(b);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  });
  root.child("model", [&](Section& s) {
    s.get_number("r_u", cfg.model.r_u);
    s.get_number("r_v", cfg.model.r_v);
    s.get_number("chi", cfg.model.chi);
    s.get_number("gamma", cfg.model.gamma);
    s.get_number("k", cfg.model.k);
    s.get_number("f", cfg.model.f);
    s.get_number("g", cfg.model.g);
    s.get_number("sigma1", cfg.model.sigma1);
    s.get_number("sigma2", cfg.model.sigma2);
    std::string c = enum_name(cfg.model.calculus, kCalculus);
    s.get("calculus", c);
    cfg.model.calculus = enum_from(c, kCalculus, "calculus");
  });
  root.child("solver", [&](Section& s) {
    s.get_number("dt", cfg.solver.dt);
    s.get_number("T", cfg.solver.T);
    s.get_number("newton_tol", cfg.solver.newton_tol);
    s.get("newton_max_iter", cfg.solver.newton_max_iter);
    std::string p = enum_name(cfg.solver.nonneg_policy, kPolicy);
    s.get("nonneg_policy", p);
    cfg.solver.nonneg_policy = enum_from(p, kPolicy, "nonneg policy");
    s.get("snapshot_stride", cfg.solver.snapshot_stride);
    s.get("workers", cfg.workers);
  });
  root.child("noise", [&](Section& s) {
    s.get("modes", cfg.noise.modes);
    s.child("channel1", [&](Section& c) { read_channel(c, cfg.noise.channels[0]); });
    s.child("channel2", [&](Section& c) { read_channel(c, cfg.noise.channels[1]); });
  });
  root.child("hypothesis", [&](Section& s) {
    s.get_number("m", cfg.hypothesis.m);
    s.get_number("m0", cfg.hypothesis.m0);
    s.get_number("p_star", cfg.hypothesis.p_star);
    s.get_number("p0_star", cfg.hypothesis.p0_star);
    s.get_number("rho", cfg.hypothesis.rho);
    s.get_number("l", cfg.hypothesis.l);
    s.get_number("delta0", cfg.hypothesis.delta0);
  });
  root.child("cutoff", [&](Section& s) {
    s.get_number("kappa", cfg.cutoff.kappa);
    s.get_number("nu", cfg.cutoff.nu);
    s.get("ladder", cfg.ladder);
  });
  root.child("initial", [&](Section& s) {
    s.child("u", [&](Section& c) { read_initial(c, cfg.initial_u); });
    s.child("v", [&](Section& c) { read_initial(c, cfg.initial_v); });
  });
  root.child("run", [&](Section& s) {
    s.get("paths", cfg.run.paths);
    s.get_number("picard_tol", cfg.run.picard_tol);
    s.get("picard_max_iter", cfg.run.picard_max_iter);
    s.get_number("moment_p", cfg.run.moment_p);
    s.get("mode", cfg.run.mode);
    s.get_number("uniqueness_tol", cfg.run.uniqueness_tol);
    s.get("exit_kappas", cfg.run.exit_kappas);
    if (cfg.run.mode != "coupled" && cfg.run.mode != "decoupled")
      throw ConfigError("run.mode must be coupled or decoupled");
  });
  root.finish();

  cfg.noise.seed = cfg.seed;
  cfg.hypothesis.d = cfg.grid.dim;
  cfg.hypothesis.gamma = cfg.model.gamma;
  cfg.cutoff.gamma = cfg.model.gamma;
  cfg.cutoff.m = cfg.hypothesis.m;
  cfg.cutoff.m0 = cfg.hypothesis.m0;
  cfg.cutoff.p0_star = cfg.hypothesis.p0_star;

  try {
    cfg.model.validate();
    cfg.solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.grid.dim < 1 || cfg.grid.dim > 3) throw ConfigError("grid.dim must be 1, 2 or 3");
  if (cfg.grid.n < 8 || (cfg.grid.n & (cfg.grid.n - 1)) != 0)
    throw ConfigError("grid.n must be a power of two, at least 8");
  return cfg;
}

std::string emit_config(const RunConfig& cfg, bool pretty) {
  json j;
  j["experiment"] = cfg.experiment;
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  j["grid"] = {{"dim", cfg.grid.dim}, {"n", cfg.grid.n}, {"boundary", to_string(cfg.grid.boundary)}};
  const ModelConfig& m = cfg.model;
  j["model"] = {{"r_u", m.r_u},       {"r_v", m.r_v},       {"chi", m.chi},
                {"gamma", m.gamma},   {"k", m.k},           {"f", m.f},
                {"g", m.g},           {"sigma1", m.sigma1}, {"sigma2", m.sigma2},
                {"calculus", enum_name(m.calculus, kCalculus)}};
  const SolverConfig& s = cfg.solver;
  j["solver"] = {{"dt", s.dt},
                 {"T", s.T},
                 {"newton_tol", s.newton_tol},
                 {"newton_max_iter", s.newton_max_iter},
                 {"nonneg_policy", enum_name(s.nonneg_policy, kPolicy)},
                 {"snapshot_stride", s.snapshot_stride},
                 {"workers", cfg.workers}};
  j["noise"] = {{"modes", cfg.noise.modes},
                {"channel1", channel_json(cfg.noise.channels[0])},
                {"channel2", channel_json(cfg.noise.channels[1])}};
  const HypothesisParams& h = cfg.hypothesis;
  j["hypothesis"] = {{"m", h.m},   {"m0", h.m0}, {"p_star", h.p_star}, {"p0_star", h.p0_star},
                     {"rho", h.rho}, {"l", h.l}, {"delta0", h.delta0}};
  j["cutoff"] = {{"kappa", cfg.cutoff.kappa}, {"nu", cfg.cutoff.nu}, {"ladder", cfg.ladder}};
  j["initial"] = {{"u", initial_json(cfg.initial_u)}, {"v", initial_json(cfg.initial_v)}};
  const RunParams& r = cfg.run;
  j["run"] = {{"paths", r.paths},
              {"picard_tol", r.picard_tol},
              {"picard_max_iter", r.picard_max_iter},
              {"moment_p", r.moment_p},
              {"mode", r.mode},
              {"uniqueness_tol", r.uniqueness_tol},
              {"exit_kappas", r.exit_kappas}};
  return pretty ? j.dump(2) + "\n" : j.dump();
}

bool config_sets_seed(const std::string& text, const std::vector<std::string>& overrides) {
  return load_document(text, overrides).contains("seed");
}

void resolve_seed(RunConfig& cfg, std::optional<std::uint64_t> flag, bool config_has_seed) {
  if (flag) {
    cfg.seed = *flag;
    cfg.seed_source = SeedSource::flag;
  } else if (config_has_seed) {
    cfg.seed_source = SeedSource::config;
  } else if (const char* env = std::getenv("KLAUS_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError(std::string("KLAUS_SEED is not an integer: ") + env);
    cfg.seed = v;
    cfg.seed_source = SeedSource::environment;
  } else {
    cfg.seed_source = SeedSource::fallback;
  }
  cfg.noise.seed = cfg.seed;
}

Field make_initial(const InitialSpec& spec, const SpectralBasis& basis) {
  const Grid& g = basis.grid();
  Field f(g);
  if (spec.preset == "constant") {
    f = Field(g, spec.value);
  } else if (spec.preset == "bump") {
    if (!(spec.width > 0.0)) throw ConfigError("bump width must be positive");
    std::vector<int> idx(g.dim);
    for (std::size_t i = 0; i < f.size(); ++i) {
      g.unflatten(i, idx);
      double r2 = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        const double dx = g.coordinate(idx[a]) - spec.center;
        r2 += dx * dx;
      }
      const double s = r2 / (spec.width * spec.width);
      f[i] = spec.base + (s < 1.0 ? spec.amplitude * std::exp(1.0 - 1.0 / (1.0 - s)) : 0.0);
    }
  } else if (spec.preset == "perturbed-homogeneous") {
    if (spec.mode < 0 || static_cast<std::size_t>(spec.mode) >= basis.size())
      throw ConfigError("perturbation mode index out of range");
    f = basis.mode(static_cast<std::size_t>(spec.mode));
    f *= spec.perturbation;
    f += Field(g, spec.value);
  } else if (spec.preset == "file") {
    std::ifstream in(spec.path);
    if (!in) throw ConfigError("cannot open initial-condition file '" + spec.path + "'");
    std::vector<double> values;
    double x = 0.0;
    while (in >> x) values.push_back(x);
    if (!in.eof()) throw ConfigError("non-numeric entry in '" + spec.path + "'");
    if (values.size() != g.size())
      throw ConfigError("'" + spec.path + "' holds " + std::to_string(values.size()) + " values, grid needs " +
                        std::to_string(g.size()));
    f = Field(g, std::move(values));
  } else {
    throw ConfigError("unknown initial-condition preset '" + spec.preset + "'");
  }
  return f;
}

}  // namespace klaus
