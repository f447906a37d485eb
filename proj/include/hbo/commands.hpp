#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hbo {

/// Generates, splits and partitions the configured corpus and writes it as a
/// corpus file (train split with group ids, then the held-out split).
void cmd_generate(const std::filesystem::path& config_path, const std::filesystem::path& out_path,
                  std::optional<std::uint64_t> seed = std::nullopt);

struct RunRequest {
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> corpus_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> label;
};

/// Runs one experiment. The output directory receives config.json (the
/// resolved config), trajectory.jsonl, summary.json, model.json and
/// actors.json. Returns the summary.
nlohmann::ordered_json cmd_run(const RunRequest& request);

struct ManifestMethod {
  std::string label;
  std::filesystem::path config_path;
};

/// Paired multi-seed comparison. Runs live under
/// <output_dir>/<label>/seed-<s>/ as written by cmd_run.
struct ExperimentManifest {
  std::filesystem::path output_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<ManifestMethod> methods;
  /// Label every other method is paired against; defaults to the last one.
  std::string baseline;
};

ExperimentManifest load_manifest(const std::filesystem::path& path);

/// Directory name used for a method label ("Prop." -> "prop").
std::string label_slug(const std::string& label);

/// Builds the comparison report from completed runs, running missing ones
/// first when `run_missing` is set. Refuses when the runs of one seed saw
/// different corpora. The report is also written to
/// <output_dir>/comparison.json.
nlohmann::ordered_json cmd_compare(const ExperimentManifest& manifest, bool run_missing);

/// Human-readable table of a comparison report.
void print_comparison(std::ostream& out, const nlohmann::ordered_json& report);

/// Wide CSV of a trajectory: one row per recorded distribution snapshot with
/// columns step, global_<i>, local_<i>_<j>, reward_global_<i>,
/// reward_local_<i>_<j>. Reward cells are empty on rows without an update.
void cmd_plotdata(const std::filesystem::path& trajectory_path, std::ostream& out);

}  // namespace hbo
