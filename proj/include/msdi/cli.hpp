#pragma once

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "msdi/runner.hpp"

namespace msdi {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<long> paths;
  std::optional<std::string> out;
};

/// Command line beats the file, the file beats the defaults.
inline void apply_overrides(Scenario& s, const RunOverrides& o) {
  if (o.seed) s.master_seed = *o.seed;
  if (o.paths) {
    if (*o.paths < 1) throw ValidationError("--paths", "must be at least 1");
    s.n_paths = *o.paths;
  }
  if (o.out) s.output_dir = *o.out;
}

/// Entry point behind the `msdi` binary. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Monte Carlo experiments for monotone stochastic differential inclusions", "msdi"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string scenario_file;
  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario file");
  validate->add_option("scenario,--scenario", scenario_file, "Scenario file")->required();

  RunOverrides ov;
  std::string run_file;
  int threads = 0;
  auto* run = app.add_subcommand("run", "Run the ensemble and its checks, then write the report");
  run->add_option("--scenario", run_file, "Scenario file")->required();
  run->add_option("--seed", ov.seed, "Master seed");
  run->add_option("--paths", ov.paths, "Number of paths");
  run->add_option("--out", ov.out, "Report directory");
  run->add_option("--threads", threads, "Worker threads (0 = MONOTONE_SDI_THREADS or all cores)");

  std::string in_dir;
  bool plot = false;
  auto* report = app.add_subcommand("report", "Print the summary of an earlier run");
  report->add_option("--in", in_dir, "Report directory")->required();
  report->add_flag("--plot-data", plot, "Write plot/<metric>.csv with t,value columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*validate) {
      const Scenario s = load_scenario(scenario_file);
      out << "ok " << s.name << " digest=" << s.digest() << "\n";
      return 0;
    }
    if (*run) {
      Scenario s = load_scenario(run_file);
      apply_overrides(s, ov);
      const RunOutcome o = run_scenario(s, threads);
      write_report(o, s.output_dir);
      out << "scenario " << s.name << "  paths " << s.n_paths << "  seed " << s.master_seed << "  digest "
          << s.digest() << "\n";
      out << summary_table(o.rows);
      out << "report written to " << s.output_dir << "\n";
      return o.violated ? 2 : 0;
    }
    if (*report) {
      const auto kv = detail::read_manifest(in_dir);
      const auto rows = read_checks_csv(std::filesystem::path(in_dir) / "checks.csv");
      out << "scenario " << kv.at("scenario") << "  paths " << kv.at("n_paths") << "  seed " << kv.at("master_seed")
          << "  digest " << kv.at("digest") << "\n";
      out << summary_table(rows);
      if (plot) {
        for (const auto& p : write_plot_data(in_dir)) out << "wrote " << p.string() << "\n";
      }
      bool violated = false;
      for (const auto& r : rows) violated = violated || !r.pass;
      return violated ? 2 : 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace msdi
