// Command-line front end: generate corpora, run experiments, compare seeded
// sweeps, and export plot-ready trajectory tables.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hbo/commands.hpp"
#include "hbo/error.hpp"

namespace {

int report_error(std::string_view kind, const std::string& message) {
  std::cerr << "error: " << kind << ": " << message << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical data-balancing simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, corpus_path, manifest_path, trajectory_path, label;
  std::uint64_t seed = 0;
  bool run_missing = false;

  auto* generate = app.add_subcommand("generate", "Generate and partition a synthetic corpus");
  generate->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  generate->add_option("-o,--out", out_path, "Corpus file to write")->required();
  auto* generate_seed = generate->add_option("--seed", seed, "Override every seed");

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out_path, "Output directory")->required();
  run->add_option("--corpus", corpus_path, "Use a corpus file instead of generating one")->check(CLI::ExistingFile);
  auto* run_seed = run->add_option("--seed", seed, "Override every seed");
  run->add_option("--label", label, "Run label");

  auto* compare = app.add_subcommand("compare", "Compare methods across paired seeds");
  compare->add_option("-m,--manifest", manifest_path, "Experiment manifest (JSON)")->required()->check(CLI::ExistingFile);
  compare->add_flag("--run-missing", run_missing, "Run any method/seed pair without a summary first");

  auto* plotdata = app.add_subcommand("plotdata", "Export a trajectory as a wide CSV table");
  plotdata->add_option("-t,--trajectory", trajectory_path, "Trajectory file")->required()->check(CLI::ExistingFile);
  plotdata->add_option("-o,--out", out_path, "CSV file to write (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      hbo::cmd_generate(config_path, out_path,
                        generate_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt);
      std::cout << "wrote " << out_path << '\n';
    } else if (run->parsed()) {
      hbo::RunRequest request{config_path, out_path, std::nullopt, std::nullopt, std::nullopt};
      if (!corpus_path.empty()) request.corpus_path = corpus_path;
      if (run_seed->count()) request.seed = seed;
      if (!label.empty()) request.label = label;
      const auto summary = hbo::cmd_run(request);
      std::cout << summary.at("method").get<std::string>() << ": macro perplexity "
                << summary.at("metrics").at("macro_perplexity").get<double>() << " over "
                << summary.at("steps").get<long>() << " steps -> " << out_path << '\n';
      for (const auto& w : summary.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << '\n';
    } else if (compare->parsed()) {
      const auto report = hbo::cmd_compare(hbo::load_manifest(manifest_path), run_missing);
      hbo::print_comparison(std::cout, report);
    } else if (plotdata->parsed()) {
      if (out_path.empty()) {
        hbo::cmd_plotdata(trajectory_path, std::cout);
      } else {
        std::ofstream out(out_path);
        if (!out) return report_error("io", "cannot write '" + out_path + "'");
        hbo::cmd_plotdata(trajectory_path, out);
      }
    }
  } catch (const hbo::Error& e) {
    return report_error(hbo::to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
