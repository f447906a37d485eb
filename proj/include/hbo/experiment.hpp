#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbo/config.hpp"
#include "hbo/driver.hpp"

namespace hbo {

/// Everything a run needs that does not depend on the run mode.
struct PreparedExperiment {
  MixtureCorpus train;    // partitioned into difficulty groups
  MixtureCorpus heldout;  // unpartitioned
  ToyLanguageModel base_model;
  std::string corpus_fingerprint;
};

/// Warm-up on uniformly chosen subsets, uniform examples within a subset.
ToyLanguageModel pretrain_base_model(const MixtureCorpus& corpus, const ModelShape& shape, const PretrainConfig& cfg,
                                     std::uint64_t seed);

/// Generates the corpus, withholds the held-out split, builds the base model,
/// scores difficulty with it and partitions the training split.
PreparedExperiment prepare_experiment(const ExperimentConfig& config);

/// Same as prepare_experiment but with a corpus loaded from a file. A
/// partitioned corpus is used as-is; an unpartitioned one is scored and
/// partitioned with the base model.
PreparedExperiment prepare_from_corpus(const ExperimentConfig& config, CorpusSplit corpus);

/// Dispatches to run_hbo / run_static / run_ablation by mode and evaluates
/// the final model on the held-out split.
RunResult execute_run(const PreparedExperiment& prepared, const ExperimentConfig& config);

// Trajectory files are line-delimited JSON. Line 1 is a header:
//   {"format":"hbo-trajectory","version":1,"method":M,"subsets":N,"groups":K,
//    "initial_global":[...],"initial_local":[[...],...]}
// then one record per step, fields in this order (optional ones omitted):
//   {"step":t,"subset":i,"group":j,"loss":x,"global":[...],"local":[[...]],
//    "rewards":[{"level":"global"|"local","subset":i,"group":j,"value":v},...]}
void write_trajectory(std::ostream& out, const RunResult& result);

struct TrajectoryFile {
  std::string method;
  std::size_t subsets = 0;
  std::size_t groups = 0;
  std::vector<double> initial_global;
  std::vector<std::vector<double>> initial_local;
  std::vector<TrajectoryRecord> records;
};

/// Parses a trajectory file. An empty input yields an empty TrajectoryFile.
/// Malformed lines raise an io error naming the line number.
TrajectoryFile read_trajectory(std::istream& in);

/// Summary report: {"format":"hbo-summary","version":1,"label","method",
/// "steps","corpus_fingerprint","config",metrics{per_subset,macro_*},
/// final distributions, warnings}.
nlohmann::ordered_json summary_json(const RunResult& result, const ExperimentConfig& config,
                                    const PreparedExperiment& prepared);

nlohmann::ordered_json actors_json(const RunResult& result);

}  // namespace hbo
