#include "hbo/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "hbo/error.hpp"

namespace hbo {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Walks one JSON object, remembering which keys were consumed so leftovers
/// can be reported as unknown fields.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorKind::InvalidConfig, where() + "must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::InvalidConfig, "field '" + field(key) + "' has the wrong type");
    }
  }

  template <typename T>
  T required(const std::string& key) {
    require(j_.contains(key), ErrorKind::InvalidConfig, "missing required field '" + field(key) + "'");
    return get<T>(key, T{});
  }

  /// Temperatures accept numbers or "inf"/"infinity".
  double temperature(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      require(s == "inf" || s == "infinity", ErrorKind::InvalidConfig,
              "field '" + field(key) + "' must be a number or \"inf\"");
      return kInfiniteTemperature;
    }
    require(v.is_number(), ErrorKind::InvalidConfig, "field '" + field(key) + "' must be a number or \"inf\"");
    return v.get<double>();
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      require(seen_.count(key) > 0, ErrorKind::InvalidConfig, "unknown field '" + field(key) + "'");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config " : "'" + path_ + "' "; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ordered_json temperature_json(double tau) { return std::isinf(tau) ? ordered_json("inf") : ordered_json(tau); }

SubsetSpec parse_subset(Section s) {
  SubsetSpec spec;
  spec.size = s.required<std::size_t>("size");
  spec.kind = generator_kind_from_string(s.get<std::string>("kind", to_string(spec.kind)));
  spec.transition_entropy = s.get("transition_entropy", spec.transition_entropy);
  spec.noise_spread = s.get("noise_spread", spec.noise_spread);
  const auto instr = s.get<std::vector<int>>("instruction_length", {spec.instruction_min, spec.instruction_max});
  const auto resp = s.get<std::vector<int>>("response_length", {spec.response_min, spec.response_max});
  require(instr.size() == 2, ErrorKind::InvalidConfig, "field '" + s.field("instruction_length") + "' must be [min, max]");
  require(resp.size() == 2, ErrorKind::InvalidConfig, "field '" + s.field("response_length") + "' must be [min, max]");
  spec.instruction_min = instr[0];
  spec.instruction_max = instr[1];
  spec.response_min = resp[0];
  spec.response_max = resp[1];
  s.finish();
  return spec;
}

}  // namespace

ExperimentConfig default_desk_config() {
  ExperimentConfig c;
  c.label = "desk";
  SubsetSpec large;
  large.size = 10000;
  large.transition_entropy = 0.15;
  large.noise_spread = 0.4;
  SubsetSpec medium;
  medium.size = 2000;
  medium.transition_entropy = 0.25;
  medium.noise_spread = 0.5;
  SubsetSpec small;
  small.size = 500;
  small.kind = GeneratorKind::TemplateGrammar;
  small.transition_entropy = 0.35;
  small.noise_spread = 0.6;
  c.corpus.subsets = {large, medium, small};
  return c;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Section root(j, "");
  c.label = root.get<std::string>("label", c.label);

  {
    Section s = root.child("seeds");
    c.seeds.corpus = s.get("corpus", c.seeds.corpus);
    c.seeds.model = s.get("model", c.seeds.model);
    c.seeds.training = s.get("training", c.seeds.training);
    c.seeds.reward = s.get("reward", c.seeds.reward);
    c.seeds.actor = s.get("actor", c.seeds.actor);
    s.finish();
  }
  {
    require(j.is_object() && j.contains("corpus"), ErrorKind::InvalidConfig, "missing required field 'corpus'");
    Section s = root.child("corpus");
    c.corpus.vocab_size = s.get("vocab_size", c.corpus.vocab_size);
    c.corpus.heldout_fraction = s.get("heldout_fraction", c.corpus.heldout_fraction);
    require(s.has("subsets"), ErrorKind::InvalidConfig, "missing required field 'corpus.subsets'");
    const json& subsets = s.raw("subsets");
    require(subsets.is_array() && !subsets.empty(), ErrorKind::InvalidConfig,
            "field 'corpus.subsets' must be a non-empty array");
    for (std::size_t i = 0; i < subsets.size(); ++i)
      c.corpus.subsets.push_back(parse_subset(Section(subsets[i], "corpus.subsets[" + std::to_string(i) + "]")));
    s.finish();
  }
  {
    Section s = root.child("model");
    c.model.context_window = s.get("context_window", c.model.context_window);
    c.model.embed_dim = s.get("embed_dim", c.model.embed_dim);
    c.model.hidden_dim = s.get("hidden_dim", c.model.hidden_dim);
    s.finish();
  }
  c.model.vocab_size = c.corpus.vocab_size;
  {
    Section s = root.child("pretrain");
    c.pretrain.steps = s.get("steps", c.pretrain.steps);
    c.pretrain.batch_size = s.get("batch_size", c.pretrain.batch_size);
    c.pretrain.learning_rate = s.get("learning_rate", c.pretrain.learning_rate);
    s.finish();
  }
  {
    Section s = root.child("difficulty");
    c.difficulty_metric = difficulty_metric_from_string(s.get<std::string>("metric", to_string(c.difficulty_metric)));
    c.run.group_count = s.get("groups", c.run.group_count);
    s.finish();
  }
  {
    Section s = root.child("optimizer");
    auto& o = c.run.optimizer;
    o.kind = optimizer_kind_from_string(s.get<std::string>("kind", to_string(o.kind)));
    o.learning_rate = s.get("learning_rate", o.learning_rate);
    o.beta1 = s.get("beta1", o.beta1);
    o.beta2 = s.get("beta2", o.beta2);
    o.epsilon = s.get("epsilon", o.epsilon);
    o.weight_decay = s.get("weight_decay", o.weight_decay);
    s.finish();
  }
  {
    Section s = root.child("actors");
    c.run.actor_hidden_dim = s.get("hidden_dim", c.run.actor_hidden_dim);
    c.run.gamma_global = s.get("gamma_global", c.run.gamma_global);
    c.run.gamma_local = s.get("gamma_local", c.run.gamma_local);
    c.run.f_global = s.get("f_global", c.run.f_global);
    c.run.f_local = s.get("f_local", c.run.f_local);
    c.run.prior_tau = s.temperature("prior_tau", c.run.prior_tau);
    c.run.center_rewards = s.get("center_rewards", c.run.center_rewards);
    s.finish();
  }
  {
    Section s = root.child("rewards");
    c.run.global_reward = global_reward_kind_from_string(s.get<std::string>("global", to_string(c.run.global_reward)));
    c.run.local_reward = local_reward_kind_from_string(s.get<std::string>("local", to_string(c.run.local_reward)));
    c.run.reward_batch_size = s.get("batch_size", c.run.reward_batch_size);
    s.finish();
  }
  {
    Section s = root.child("run");
    c.run.mode = run_mode_from_string(s.get<std::string>("mode", to_string(c.run.mode)));
    c.run.total_steps = s.get("total_steps", c.run.total_steps);
    c.run.train_batch_size = s.get("batch_size", c.run.train_batch_size);
    c.run.static_tau = s.temperature("static_tau", c.run.static_tau);
    c.run.discard_easiest_fraction = s.get("discard_easiest_fraction", c.run.discard_easiest_fraction);
    c.run.trajectory_stride = s.get("trajectory_stride", c.run.trajectory_stride);
    s.finish();
  }
  root.finish();

  require(c.pretrain.steps >= 0, ErrorKind::InvalidConfig, "pretrain.steps must be >= 0");
  require(c.pretrain.batch_size >= 1, ErrorKind::InvalidConfig, "pretrain.batch_size must be >= 1");
  require(c.pretrain.learning_rate > 0.0, ErrorKind::InvalidConfig, "pretrain.learning_rate must be > 0");
  validate(resolved_run_config(c));
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["label"] = c.label;
  j["seeds"] = {{"corpus", c.seeds.corpus},
                {"model", c.seeds.model},
                {"training", c.seeds.training},
                {"reward", c.seeds.reward},
                {"actor", c.seeds.actor}};
  ordered_json subsets = ordered_json::array();
  for (const auto& s : c.corpus.subsets) {
    subsets.push_back({{"kind", to_string(s.kind)},
                       {"size", s.size},
                       {"transition_entropy", s.transition_entropy},
                       {"noise_spread", s.noise_spread},
                       {"instruction_length", {s.instruction_min, s.instruction_max}},
                       {"response_length", {s.response_min, s.response_max}}});
  }
  j["corpus"] = {{"vocab_size", c.corpus.vocab_size},
                 {"heldout_fraction", c.corpus.heldout_fraction},
                 {"subsets", subsets}};
  j["model"] = {{"context_window", c.model.context_window},
                {"embed_dim", c.model.embed_dim},
                {"hidden_dim", c.model.hidden_dim}};
  j["pretrain"] = {{"steps", c.pretrain.steps},
                   {"batch_size", c.pretrain.batch_size},
                   {"learning_rate", c.pretrain.learning_rate}};
  j["difficulty"] = {{"metric", to_string(c.difficulty_metric)}, {"groups", c.run.group_count}};
  const auto& o = c.run.optimizer;
  j["optimizer"] = {{"kind", to_string(o.kind)},
                    {"learning_rate", o.learning_rate},
                    {"beta1", o.beta1},
                    {"beta2", o.beta2},
                    {"epsilon", o.epsilon},
                    {"weight_decay", o.weight_decay}};
  j["actors"] = {{"hidden_dim", c.run.actor_hidden_dim},
                 {"gamma_global", c.run.gamma_global},
                 {"gamma_local", c.run.gamma_local},
                 {"f_global", c.run.f_global},
                 {"f_local", c.run.f_local},
                 {"prior_tau", temperature_json(c.run.prior_tau)},
                 {"center_rewards", c.run.center_rewards}};
  j["rewards"] = {{"global", to_string(c.run.global_reward)},
                  {"local", to_string(c.run.local_reward)},
                  {"batch_size", c.run.reward_batch_size}};
  j["run"] = {{"mode", to_string(c.run.mode)},
              {"total_steps", c.run.total_steps},
              {"batch_size", c.run.train_batch_size},
              {"static_tau", temperature_json(c.run.static_tau)},
              {"discard_easiest_fraction", c.run.discard_easiest_fraction},
              {"trajectory_stride", c.run.trajectory_stride}};
  return j;
}

RunConfig resolved_run_config(const ExperimentConfig& c) {
  RunConfig r = c.run;
  r.training_seed = c.seeds.training;
  r.reward_seed = c.seeds.reward;
  r.actor_seed = c.seeds.actor;
  return r;
}

}  // namespace hbo
