#include "hbo/experiment.hpp"

#include <istream>
#include <ostream>

#include "hbo/difficulty.hpp"
#include "hbo/error.hpp"
#include "hbo/optimizer.hpp"
#include "hbo/random.hpp"

namespace hbo {

using ordered_json = nlohmann::ordered_json;

ToyLanguageModel pretrain_base_model(const MixtureCorpus& corpus, const ModelShape& shape, const PretrainConfig& cfg,
                                     std::uint64_t seed) {
  ToyLanguageModel model(shape, seed);
  if (cfg.steps <= 0) return model;

  std::vector<std::vector<const ExampleRecord*>> pools;
  for (const auto& s : corpus.subsets) {
    auto& pool = pools.emplace_back();
    for (const auto& g : s.groups)
      for (const auto& ex : g.examples) pool.push_back(&ex);
    require(!pool.empty(), ErrorKind::InvalidState, "cannot pretrain on an empty subset");
  }

  OptimizerConfig opt_cfg;
  opt_cfg.learning_rate = cfg.learning_rate;
  OptimizerState opt(opt_cfg);
  Rng rng = make_rng(seed, "pretrain");
  std::vector<double> grad(model.parameter_count());
  Batch batch(cfg.batch_size);
  for (long t = 0; t < cfg.steps; ++t) {
    for (auto& ex : batch) {
      const auto& pool = pools[uniform_index(rng, pools.size())];
      ex = pool[uniform_index(rng, pool.size())];
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    accumulate_gradients(model, batch, grad);
    optimizer_step(model.parameters(), opt, grad);
  }
  return model;
}

PreparedExperiment prepare_from_corpus(const ExperimentConfig& config, CorpusSplit corpus) {
  require(corpus.train.vocab_size == config.model.vocab_size, ErrorKind::InvalidConfig,
          "corpus vocab_size does not match the configured model");
  require(!corpus.heldout.subsets.empty() && corpus.heldout.total_examples() > 0, ErrorKind::InvalidConfig,
          "a held-out split is required (corpus.heldout_fraction > 0)");
  ToyLanguageModel base = pretrain_base_model(corpus.train, config.model, config.pretrain, config.seeds.model);
  MixtureCorpus train = std::move(corpus.train);
  if (!train.is_partitioned() || static_cast<int>(train.group_count()) != config.run.group_count) {
    const auto scores = score_corpus(base, train, config.difficulty_metric);
    train = partition_by_difficulty(train, scores, config.run.group_count);
  }
  std::string fingerprint = corpus_fingerprint(train);
  return PreparedExperiment{std::move(train), std::move(corpus.heldout), std::move(base), std::move(fingerprint)};
}

PreparedExperiment prepare_experiment(const ExperimentConfig& config) {
  const MixtureCorpus full = generate_synthetic_mixture(config.corpus.subsets, config.corpus.vocab_size,
                                                        config.seeds.corpus);
  return prepare_from_corpus(config, split_heldout(full, config.corpus.heldout_fraction, config.seeds.corpus));
}

RunResult execute_run(const PreparedExperiment& prepared, const ExperimentConfig& config) {
  const RunConfig run = resolved_run_config(config);
  validate(run);
  RunResult result = [&] {
    if (run.mode == RunMode::Static) return run_static(prepared.train, prepared.base_model, run, run.static_tau);
    if (run.mode == RunMode::Hbo && run.discard_easiest_fraction == 0.0)
      return run_hbo(prepared.train, prepared.base_model, run);
    return run_ablation(prepared.train, prepared.base_model, run);
  }();
  result.evaluation = evaluate(result.final_model, prepared.heldout);
  return result;
}

namespace {

const char* level_name(RewardLevel level) { return level == RewardLevel::Global ? "global" : "local"; }

ordered_json record_json(const TrajectoryRecord& r) {
  ordered_json j;
  j["step"] = r.step;
  j["subset"] = r.subset;
  if (r.group) j["group"] = *r.group;
  j["loss"] = r.loss;
  if (r.global) j["global"] = *r.global;
  if (r.local) j["local"] = *r.local;
  if (!r.rewards.empty()) {
    ordered_json rewards = ordered_json::array();
    for (const auto& s : r.rewards) {
      ordered_json rj;
      rj["level"] = level_name(s.level);
      rj["subset"] = s.subset_id;
      if (s.group_id) rj["group"] = *s.group_id;
      rj["value"] = s.value;
      rewards.push_back(std::move(rj));
    }
    j["rewards"] = std::move(rewards);
  }
  return j;
}

}  // namespace

void write_trajectory(std::ostream& out, const RunResult& result) {
  ordered_json header;
  header["format"] = "hbo-trajectory";
  header["version"] = 1;
  header["method"] = result.method;
  header["subsets"] = result.initial_global.size();
  header["groups"] = result.initial_local.empty() ? 0 : result.initial_local.front().size();
  header["initial_global"] = result.initial_global;
  header["initial_local"] = result.initial_local;
  out << header.dump() << '\n';
  for (const auto& r : result.trajectory) out << record_json(r).dump() << '\n';
}

TrajectoryFile read_trajectory(std::istream& in) {
  TrajectoryFile file;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "trajectory line " + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        require(j.value("format", "") == "hbo-trajectory", ErrorKind::Io, where + "missing trajectory header");
        require(j.value("version", 0) == 1, ErrorKind::Io, where + "unsupported trajectory version");
        file.method = j.at("method").get<std::string>();
        file.subsets = j.at("subsets").get<std::size_t>();
        file.groups = j.at("groups").get<std::size_t>();
        file.initial_global = j.at("initial_global").get<std::vector<double>>();
        file.initial_local = j.at("initial_local").get<std::vector<std::vector<double>>>();
        have_header = true;
        continue;
      }
      TrajectoryRecord r;
      r.step = j.at("step").get<long>();
      r.subset = j.at("subset").get<int>();
      if (j.contains("group")) r.group = j.at("group").get<int>();
      r.loss = j.at("loss").get<double>();
      if (j.contains("global")) {
        r.global = j.at("global").get<std::vector<double>>();
        require(r.global->size() == file.subsets, ErrorKind::Io, where + "global distribution has the wrong length");
      }
      if (j.contains("local")) {
        r.local = j.at("local").get<std::vector<std::vector<double>>>();
        require(r.local->size() == file.subsets, ErrorKind::Io, where + "local distributions have the wrong count");
      }
      if (j.contains("rewards")) {
        for (const auto& rj : j.at("rewards")) {
          RewardSample s;
          const auto level = rj.at("level").get<std::string>();
          require(level == "global" || level == "local", ErrorKind::Io, where + "unknown reward level");
          s.level = level == "global" ? RewardLevel::Global : RewardLevel::Local;
          s.subset_id = rj.at("subset").get<int>();
          if (rj.contains("group")) s.group_id = rj.at("group").get<int>();
          s.value = rj.at("value").get<double>();
          s.step = r.step;
          r.rewards.push_back(s);
        }
      }
      file.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Io, where + e.what());
    }
  }
  return file;
}

ordered_json summary_json(const RunResult& result, const ExperimentConfig& config, const PreparedExperiment& prepared) {
  require(result.evaluation.has_value(), ErrorKind::InvalidState, "run has not been evaluated");
  const auto& eval = *result.evaluation;
  ordered_json j;
  j["format"] = "hbo-summary";
  j["version"] = 1;
  j["label"] = config.label;
  j["method"] = result.method;
  j["steps"] = result.steps_run;
  j["corpus_fingerprint"] = prepared.corpus_fingerprint;
  j["config"] = config_to_json(config);
  ordered_json per_subset = ordered_json::array();
  for (std::size_t i = 0; i < eval.subsets.size(); ++i) {
    per_subset.push_back({{"subset", i},
                          {"perplexity", eval.subsets[i].perplexity},
                          {"loss", eval.subsets[i].loss},
                          {"examples", eval.subsets[i].examples}});
  }
  j["metrics"] = {{"per_subset", per_subset},
                  {"macro_perplexity", eval.macro_perplexity},
                  {"macro_loss", eval.macro_loss}};
  j["final_global_distribution"] = result.global_distribution_at(result.steps_run);
  j["final_local_distributions"] = result.local_distributions_at(result.steps_run);
  j["warnings"] = result.warnings;
  return j;
}

ordered_json actors_json(const RunResult& result) {
  ordered_json j;
  j["format"] = "hbo-actors";
  j["version"] = 1;
  j["global"] = actor_to_json(result.global_actor);
  j["local"] = ordered_json::array();
  for (const auto& a : result.local_actors) j["local"].push_back(actor_to_json(a));
  return j;
}

}  // namespace hbo
