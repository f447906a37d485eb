#include "hbo/commands.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include "hbo/config.hpp"
#include "hbo/error.hpp"
#include "hbo/experiment.hpp"

namespace hbo {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write '" + path.string() + "'");
  return out;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

void cmd_generate(const fs::path& config_path, const fs::path& out_path, std::optional<std::uint64_t> seed) {
  ExperimentConfig config = load_config(config_path.string());
  if (seed) config.seeds.set_all(*seed);
  const PreparedExperiment prepared = prepare_experiment(config);
  auto out = open_output(out_path);
  write_corpus(out, prepared.train, &prepared.heldout);
}

ordered_json cmd_run(const RunRequest& request) {
  ExperimentConfig config = load_config(request.config_path.string());
  if (request.seed) config.seeds.set_all(*request.seed);
  if (request.label) config.label = *request.label;

  PreparedExperiment prepared = [&] {
    if (!request.corpus_path) return prepare_experiment(config);
    std::ifstream in(*request.corpus_path);
    require(in.good(), ErrorKind::Io, "cannot open corpus '" + request.corpus_path->string() + "'");
    return prepare_from_corpus(config, read_corpus(in));
  }();

  const RunResult result = execute_run(prepared, config);
  const ordered_json summary = summary_json(result, config, prepared);

  fs::create_directories(request.out_dir);
  open_output(request.out_dir / "config.json") << config_to_json(config).dump(2) << '\n';
  {
    auto out = open_output(request.out_dir / "trajectory.jsonl");
    write_trajectory(out, result);
  }
  open_output(request.out_dir / "summary.json") << summary.dump(2) << '\n';
  {
    auto out = open_output(request.out_dir / "model.json");
    save_checkpoint(out, result.final_model);
  }
  open_output(request.out_dir / "actors.json") << actors_json(result).dump() << '\n';
  return summary;
}

std::string label_slug(const std::string& label) {
  std::string slug;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      slug += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!slug.empty() && slug.back() != '-') {
      slug += '-';
    }
  }
  while (!slug.empty() && slug.back() == '-') slug.pop_back();
  require(!slug.empty(), ErrorKind::InvalidConfig, "method label '" + label + "' has no usable characters");
  return slug;
}

ExperimentManifest load_manifest(const fs::path& path) {
  const json j = read_json_file(path);
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  ExperimentManifest m;
  try {
    require(j.contains("output_dir"), ErrorKind::InvalidConfig, "missing required field 'output_dir'");
    require(j.contains("seeds"), ErrorKind::InvalidConfig, "missing required field 'seeds'");
    require(j.contains("methods"), ErrorKind::InvalidConfig, "missing required field 'methods'");
    const fs::path out = j.at("output_dir").get<std::string>();
    m.output_dir = out.is_absolute() ? out : base / out;
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& mj : j.at("methods")) {
      require(mj.contains("label") && mj.contains("config"), ErrorKind::InvalidConfig,
              "every manifest method needs 'label' and 'config'");
      const fs::path cfg = mj.at("config").get<std::string>();
      m.methods.push_back({mj.at("label").get<std::string>(), cfg.is_absolute() ? cfg : base / cfg});
    }
    m.baseline = j.value("baseline", m.methods.empty() ? std::string() : m.methods.back().label);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, "malformed manifest: " + std::string(e.what()));
  }
  return m;
}

ordered_json cmd_compare(const ExperimentManifest& manifest, bool run_missing) {
  require(!manifest.seeds.empty(), ErrorKind::InvalidConfig, "manifest seed list is empty");
  require(manifest.methods.size() >= 2, ErrorKind::InvalidConfig, "a comparison needs at least two methods");
  std::size_t baseline_index = manifest.methods.size();
  for (std::size_t m = 0; m < manifest.methods.size(); ++m)
    if (manifest.methods[m].label == manifest.baseline) baseline_index = m;
  require(baseline_index < manifest.methods.size(), ErrorKind::InvalidConfig,
          "baseline '" + manifest.baseline + "' is not one of the manifest methods");

  // method -> per-seed summaries
  std::vector<std::vector<json>> summaries(manifest.methods.size());
  for (std::size_t m = 0; m < manifest.methods.size(); ++m) {
    const auto& method = manifest.methods[m];
    for (std::uint64_t seed : manifest.seeds) {
      const fs::path dir = manifest.output_dir / label_slug(method.label) / ("seed-" + std::to_string(seed));
      if (!fs::exists(dir / "summary.json")) {
        require(run_missing, ErrorKind::InvalidState,
                "run '" + method.label + "' seed " + std::to_string(seed) + " has no summary at " + dir.string());
        cmd_run(RunRequest{method.config_path, dir, std::nullopt, seed, method.label});
      }
      summaries[m].push_back(read_json_file(dir / "summary.json"));
    }
  }

  for (std::size_t s = 0; s < manifest.seeds.size(); ++s) {
    const std::string reference = summaries[0][s].at("corpus_fingerprint").get<std::string>();
    for (std::size_t m = 1; m < manifest.methods.size(); ++m) {
      const std::string other = summaries[m][s].at("corpus_fingerprint").get<std::string>();
      require(other == reference, ErrorKind::InvalidConfig,
              "mismatched corpora for seed " + std::to_string(manifest.seeds[s]) + ": '" +
                  manifest.methods[0].label + "' has " + reference + " but '" + manifest.methods[m].label + "' has " +
                  other);
    }
  }

  auto macro = [&](std::size_t m, const char* key) {
    std::vector<double> v;
    for (const auto& s : summaries[m]) v.push_back(s.at("metrics").at(key).get<double>());
    return v;
  };

  ordered_json report;
  report["format"] = "hbo-comparison";
  report["version"] = 1;
  report["seeds"] = manifest.seeds;
  report["baseline"] = manifest.baseline;
  report["methods"] = ordered_json::array();
  for (std::size_t m = 0; m < manifest.methods.size(); ++m) {
    const auto ppl = macro(m, "macro_perplexity");
    const auto loss = macro(m, "macro_loss");
    report["methods"].push_back({{"label", manifest.methods[m].label},
                                 {"method", summaries[m][0].at("method")},
                                 {"macro_perplexity", ppl},
                                 {"macro_perplexity_mean", mean_of(ppl)},
                                 {"macro_perplexity_stddev", stddev_of(ppl)},
                                 {"macro_loss_mean", mean_of(loss)},
                                 {"macro_loss_stddev", stddev_of(loss)}});
  }

  const auto base_ppl = macro(baseline_index, "macro_perplexity");
  report["paired"] = ordered_json::array();
  for (std::size_t m = 0; m < manifest.methods.size(); ++m) {
    if (m == baseline_index) continue;
    const auto ppl = macro(m, "macro_perplexity");
    std::vector<double> diff(ppl.size());
    int lower = 0;
    for (std::size_t s = 0; s < ppl.size(); ++s) {
      diff[s] = ppl[s] - base_ppl[s];
      if (diff[s] < 0.0) ++lower;
    }
    const double mean_diff = mean_of(diff);
    report["paired"].push_back({{"method", manifest.methods[m].label},
                                {"baseline", manifest.baseline},
                                {"macro_perplexity_difference", diff},
                                {"mean_difference", mean_diff},
                                {"sign", mean_diff < 0.0 ? "lower" : (mean_diff > 0.0 ? "higher" : "equal")},
                                {"seeds_lower", lower}});
  }

  open_output(manifest.output_dir / "comparison.json") << report.dump(2) << '\n';
  return report;
}

void print_comparison(std::ostream& out, const ordered_json& report) {
  out << std::left << std::setw(24) << "method" << "macro PPL (mean +- sd over " << report.at("seeds").size()
      << " seeds)\n";
  for (const auto& m : report.at("methods")) {
    out << std::left << std::setw(24) << m.at("label").get<std::string>() << std::fixed << std::setprecision(4)
        << m.at("macro_perplexity_mean").get<double>() << " +- " << m.at("macro_perplexity_stddev").get<double>()
        << '\n';
  }
  for (const auto& p : report.at("paired")) {
    out << p.at("method").get<std::string>() << " - " << p.at("baseline").get<std::string>()
        << ": mean paired difference " << std::showpos << p.at("mean_difference").get<double>() << std::noshowpos
        << " (" << p.at("sign").get<std::string>() << ", lower on " << p.at("seeds_lower").get<int>() << " of "
        << report.at("seeds").size() << " seeds)\n";
  }
}

void cmd_plotdata(const fs::path& trajectory_path, std::ostream& out) {
  std::ifstream in(trajectory_path);
  require(in.good(), ErrorKind::Io, "cannot open trajectory '" + trajectory_path.string() + "'");
  const TrajectoryFile file = read_trajectory(in);
  if (file.subsets == 0) return;

  const std::size_t n = file.subsets;
  const std::size_t k = file.groups;
  out << "step";
  for (std::size_t i = 0; i < n; ++i) out << ",global_" << i;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out << ",local_" << i << '_' << j;
  for (std::size_t i = 0; i < n; ++i) out << ",reward_global_" << i;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out << ",reward_local_" << i << '_' << j;
  out << '\n';

  for (const auto& r : file.records) {
    if (!r.global || !r.local) continue;
    std::vector<std::string> reward_global(n), reward_local(n * k);
    for (const auto& s : r.rewards) {
      const auto i = static_cast<std::size_t>(s.subset_id);
      if (i >= n) continue;
      if (s.level == RewardLevel::Global) {
        reward_global[i] = format_number(s.value);
      } else if (s.group_id && static_cast<std::size_t>(*s.group_id) < k) {
        reward_local[i * k + static_cast<std::size_t>(*s.group_id)] = format_number(s.value);
      }
    }
    out << r.step;
    for (double p : *r.global) out << ',' << format_number(p);
    for (const auto& dist : *r.local) {
      for (std::size_t j = 0; j < k; ++j) out << ',' << (j < dist.size() ? format_number(dist[j]) : "");
    }
    for (const auto& cell : reward_global) out << ',' << cell;
    for (const auto& cell : reward_local) out << ',' << cell;
    out << '\n';
  }
}

}  // namespace hbo
