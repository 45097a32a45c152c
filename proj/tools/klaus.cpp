#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "klaus/app.hpp"
#include "klaus/config.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw klaus::ConfigError("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Klausmeier simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::optional<unsigned> workers;
  bool print_config = false;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "run one coupled (or decoupled) path"},
      {"picard", "solve the truncated system by Picard iteration"},
      {"glue", "glue truncated solutions along a cutoff ladder"},
      {"ensemble", "Monte-Carlo moment and energy estimates"},
      {"uniqueness", "pathwise uniqueness experiment (d = 1 only)"},
      {"validate", "check the hypothesis index set"},
      {"noise-selftest", "check the sampled noise against its covariance"},
      {"pattern-demo", "deterministic or noisy Klausmeier pattern run"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides config and KLAUS_SEED)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--override", overrides, "key.path=value, repeatable")->take_all();
    sub->add_option("--workers", workers, "worker threads for ensembles (0 = all cores)");
    sub->add_flag("--print-config", print_config, "print the resolved config and exit");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  klaus::RunConfig cfg;
  try {
    const std::string text = config_path.empty() ? std::string() : read_file(config_path);
    cfg = klaus::parse_config(text, overrides);
    cfg.experiment = command;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    klaus::resolve_seed(cfg, seed, klaus::config_sets_seed(text, overrides));
    if (workers) cfg.workers = *workers;
  } catch (const std::exception& e) {
    std::cerr << "klaus " << command << ": " << e.what() << "\n";
    return 2;
  }

  if (print_config) {
    std::cout << klaus::emit_config(cfg);
    return 0;
  }

  const klaus::RunOutcome out = klaus::run_experiment(cfg);
  std::cout << "klaus " << command << ": " << (out.status == 0 ? "ok" : "FAILED") << " seed=" << cfg.seed << " ("
            << klaus::to_string(cfg.seed_source) << ") out=" << cfg.output_dir << " | " << out.summary << "\n";
  return out.status;
}
