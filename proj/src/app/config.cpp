#include "vfactor/app/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace vfactor::app {
namespace {

class Reader {
 public:
  Reader(const YAML::Node& node, std::string section, const std::string& source)
      : node_(node), section_(std::move(section)), source_(source) {
    if (node_ && !node_.IsMap()) fail(node_, "section '" + section_ + "' must be a mapping");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    known_.insert(key);
    if (!node_) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, "field '" + qualified(key) + "' has an invalid value");
    }
  }

  void read_size(const std::string& key, std::size_t& out) {
    long long v = static_cast<long long>(out);
    read(key, v);
    if (v < 0) fail(node_[key], "field '" + qualified(key) + "' must be non-negative");
    out = static_cast<std::size_t>(v);
  }

  YAML::Node child(const std::string& key) {
    known_.insert(key);
    return node_ ? node_[key] : YAML::Node(YAML::NodeType::Undefined);
  }

  void reject_unknown() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!known_.count(key)) {
        std::string expected;
        for (const auto& k : known_) expected += (expected.empty() ? "" : ", ") + k;
        fail(kv.first, "unknown key '" + qualified(key) + "' (expected one of: " + expected + ")");
      }
    }
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
    const int line = at ? at.Mark().line + 1 : (node_ ? node_.Mark().line + 1 : 0);
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + message);
  }

 private:
  std::string qualified(const std::string& key) const {
    return section_.empty() ? key : section_ + "." + key;
  }

  const YAML::Node node_;
  std::string section_;
  const std::string& source_;
  std::set<std::string> known_;
};

env::MatrixGameSpec read_matrix(const YAML::Node& node, const std::string& source) {
  Reader r(node, "env.matrix", source);
  env::MatrixGameSpec spec;
  spec.states.clear();
  r.read_size("num_agents", spec.num_agents);
  r.read_size("actions_per_agent", spec.actions_per_agent);
  r.read("state_observable", spec.state_observable);
  const YAML::Node states = r.child("states");
  if (!states || !states.IsSequence()) r.fail(node, "env.matrix.states must be a list");
  for (const auto& s : states) {
    Reader sr(s, "env.matrix.states[]", source);
    env::MatrixState st;
    sr.read("probability", st.probability);
    sr.read("payoff", st.payoff);
    sr.reject_unknown();
    spec.states.push_back(std::move(st));
  }
  r.reject_unknown();
  try {
    spec.validate();
  } catch (const env::EnvError& e) {
    r.fail(node, std::string("env.matrix: ") + e.what());
  }
  return spec;
}

env::GridGameSpec read_grid(const YAML::Node& node, const std::string& source) {
  Reader r(node, "env.grid", source);
  env::GridGameSpec spec;
  r.read_size("width", spec.width);
  r.read_size("height", spec.height);
  r.read_size("num_agents", spec.num_agents);
  r.read_size("num_targets", spec.num_targets);
  r.read_size("episode_limit", spec.episode_limit);
  r.read("capture_reward", spec.capture_reward);
  r.read("damage_penalty", spec.damage_penalty);
  r.read_size("sight_radius", spec.sight_radius);
  r.reject_unknown();
  try {
    spec.validate();
  } catch (const env::EnvError& e) {
    r.fail(node, std::string("env.grid: ") + e.what());
  }
  return spec;
}

void emit_matrix(YAML::Emitter& out, const env::MatrixGameSpec& spec) {
  out << YAML::Key << "matrix" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "num_agents" << YAML::Value << spec.num_agents;
  out << YAML::Key << "actions_per_agent" << YAML::Value << spec.actions_per_agent;
  out << YAML::Key << "state_observable" << YAML::Value << spec.state_observable;
  out << YAML::Key << "states" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : spec.states) {
    out << YAML::BeginMap << YAML::Key << "probability" << YAML::Value << s.probability;
    out << YAML::Key << "payoff" << YAML::Value << YAML::Flow << s.payoff << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
}

void emit_grid(YAML::Emitter& out, const env::GridGameSpec& spec) {
  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "width" << YAML::Value << spec.width;
  out << YAML::Key << "height" << YAML::Value << spec.height;
  out << YAML::Key << "num_agents" << YAML::Value << spec.num_agents;
  out << YAML::Key << "num_targets" << YAML::Value << spec.num_targets;
  out << YAML::Key << "episode_limit" << YAML::Value << spec.episode_limit;
  out << YAML::Key << "capture_reward" << YAML::Value << spec.capture_reward;
  out << YAML::Key << "damage_penalty" << YAML::Value << spec.damage_penalty;
  out << YAML::Key << "sight_radius" << YAML::Value << spec.sight_radius;
  out << YAML::EndMap;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  Reader top(root, "", source);
  ExperimentConfig cfg;

  {
    const YAML::Node env_node = top.child("env");
    Reader r(env_node, "env", source);
    const YAML::Node preset = r.child("preset");
    const YAML::Node matrix = r.child("matrix");
    const YAML::Node grid = r.child("grid");
    r.reject_unknown();
    const int given = (preset ? 1 : 0) + (matrix ? 1 : 0) + (grid ? 1 : 0);
    if (given > 1) r.fail(env_node, "env: give exactly one of preset, matrix, grid");
    if (preset) {
      const auto name = preset.as<std::string>();
      try {
        cfg.env = env::preset(name);
      } catch (const std::exception& e) {
        r.fail(preset, e.what());
      }
      cfg.env_preset = name;
    } else if (matrix) {
      cfg.env = read_matrix(matrix, source);
    } else if (grid) {
      cfg.env = read_grid(grid, source);
    } else {
      cfg.env_preset = "nondec-2x2";
    }
  }

  {
    const YAML::Node node = top.child("algorithm");
    Reader r(node, "algorithm", source);
    std::string family = algo::to_string(cfg.algorithm.family);
    std::string ablation = algo::to_string(cfg.algorithm.ablation);
    std::string head_mode = algo::to_string(cfg.algorithm.head_mode);
    r.read("family", family);
    r.read("ablation", ablation);
    r.read("lambda_opt", cfg.algorithm.lambda_opt);
    r.read("lambda_nopt", cfg.algorithm.lambda_nopt);
    r.read("gamma", cfg.algorithm.gamma);
    r.read_size("target_update_period", cfg.algorithm.target_update_period);
    r.read("head_mode", head_mode);
    r.read("detach_joint_inputs", cfg.algorithm.detach_joint_inputs);
    r.read("own_head_utilities", cfg.algorithm.own_head_utilities);
    r.reject_unknown();
    try {
      cfg.algorithm.family = algo::family_from_string(family);
      cfg.algorithm.ablation = algo::ablation_from_string(ablation);
      cfg.algorithm.head_mode = algo::head_mode_from_string(head_mode);
      cfg.algorithm.validate();
    } catch (const algo::SpecError& e) {
      r.fail(node, std::string("algorithm: ") + e.what());
    }
  }

  {
    Reader r(top.child("network"), "network", source);
    auto& n = cfg.network;
    r.read_size("embed_width", n.embed_width);
    r.read_size("gru_width", n.gru_width);
    r.read_size("mixer_width", n.mixer_width);
    r.read_size("hyper_width", n.hyper_width);
    r.read_size("feedforward_width", n.feedforward_width);
    r.read_size("value_width", n.value_width);
    r.read("heterogeneous", n.heterogeneous);
    r.reject_unknown();
  }

  {
    Reader r(top.child("optimizer"), "optimizer", source);
    r.read("lr", cfg.run.optimizer.learning_rate);
    r.read("decay", cfg.run.optimizer.decay);
    r.read("eps", cfg.run.optimizer.epsilon);
    r.read("lr_final", cfg.run.final_learning_rate);
    r.reject_unknown();
  }

  {
    const YAML::Node node = top.child("run");
    Reader r(node, "run", source);
    auto& run = cfg.run;
    r.read_size("total_env_steps", run.total_env_steps);
    r.read_size("train_interval", run.train_interval);
    r.read_size("evaluation_interval", run.evaluation_interval);
    r.read_size("evaluation_episodes", run.evaluation_episodes);
    r.read("full_exploration", run.full_exploration);
    r.read_size("buffer_capacity", run.buffer_capacity);
    r.read_size("batch_size", run.batch_size);
    r.read("eps_start", run.exploration.eps_start);
    r.read("eps_end", run.exploration.eps_end);
    r.read_size("anneal_steps", run.exploration.anneal_steps);
    r.reject_unknown();
    try {
      run.validate();
    } catch (const std::invalid_argument& e) {
      r.fail(node, e.what());
    }
  }

  {
    const YAML::Node seeds = top.child("seeds");
    if (seeds) {
      if (!seeds.IsSequence() || seeds.size() == 0) {
        top.fail(seeds, "seeds must be a non-empty list of integers");
      }
      cfg.seeds.clear();
      for (const auto& s : seeds) {
        try {
          cfg.seeds.push_back(s.as<std::uint64_t>());
        } catch (const YAML::Exception&) {
          top.fail(s, "seeds must be non-negative integers");
        }
      }
    }
  }

  std::string output_dir = cfg.output_dir.string();
  top.read("output_dir", output_dir);
  cfg.output_dir = output_dir;
  top.reject_unknown();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ":0: cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string resolved_config_text(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;

  out << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
  if (cfg.env_preset) {
    out << YAML::Key << "preset" << YAML::Value << *cfg.env_preset;
  } else if (const auto* m = std::get_if<env::MatrixGameSpec>(&cfg.env)) {
    emit_matrix(out, *m);
  } else {
    emit_grid(out, std::get<env::GridGameSpec>(cfg.env));
  }
  out << YAML::EndMap;

  const auto& a = cfg.algorithm;
  out << YAML::Key << "algorithm" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "family" << YAML::Value << algo::to_string(a.family);
  out << YAML::Key << "ablation" << YAML::Value << algo::to_string(a.ablation);
  out << YAML::Key << "lambda_opt" << YAML::Value << a.lambda_opt;
  out << YAML::Key << "lambda_nopt" << YAML::Value << a.lambda_nopt;
  out << YAML::Key << "gamma" << YAML::Value << a.gamma;
  out << YAML::Key << "target_update_period" << YAML::Value << a.target_update_period;
  out << YAML::Key << "head_mode" << YAML::Value << algo::to_string(a.head_mode);
  out << YAML::Key << "detach_joint_inputs" << YAML::Value << a.detach_joint_inputs;
  out << YAML::Key << "own_head_utilities" << YAML::Value << a.own_head_utilities;
  out << YAML::EndMap;

  const auto& n = cfg.network;
  out << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "embed_width" << YAML::Value << n.embed_width;
  out << YAML::Key << "gru_width" << YAML::Value << n.gru_width;
  out << YAML::Key << "mixer_width" << YAML::Value << n.mixer_width;
  out << YAML::Key << "hyper_width" << YAML::Value << n.hyper_width;
  out << YAML::Key << "feedforward_width" << YAML::Value << n.feedforward_width;
  out << YAML::Key << "value_width" << YAML::Value << n.value_width;
  out << YAML::Key << "heterogeneous" << YAML::Value << n.heterogeneous;
  out << YAML::EndMap;

  const auto& o = cfg.run.optimizer;
  out << YAML::Key << "optimizer" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lr" << YAML::Value << o.learning_rate;
  out << YAML::Key << "decay" << YAML::Value << o.decay;
  out << YAML::Key << "eps" << YAML::Value << o.epsilon;
  out << YAML::Key << "lr_final" << YAML::Value << cfg.run.final_learning_rate;
  out << YAML::EndMap;

  const auto& r = cfg.run;
  out << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "total_env_steps" << YAML::Value << r.total_env_steps;
  out << YAML::Key << "train_interval" << YAML::Value << r.train_interval;
  out << YAML::Key << "evaluation_interval" << YAML::Value << r.evaluation_interval;
  out << YAML::Key << "evaluation_episodes" << YAML::Value << r.evaluation_episodes;
  out << YAML::Key << "full_exploration" << YAML::Value << r.full_exploration;
  out << YAML::Key << "buffer_capacity" << YAML::Value << r.buffer_capacity;
  out << YAML::Key << "batch_size" << YAML::Value << r.batch_size;
  out << YAML::Key << "eps_start" << YAML::Value << r.exploration.eps_start;
  out << YAML::Key << "eps_end" << YAML::Value << r.exploration.eps_end;
  out << YAML::Key << "anneal_steps" << YAML::Value << r.exploration.anneal_steps;
  out << YAML::EndMap;

  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << cfg.seeds;
  out << YAML::Key << "output_dir" << YAML::Value << cfg.output_dir.string();
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& dir) {
  const char* root = std::getenv("VFACTOR_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0' || dir.is_absolute()) return dir;
  return std::filesystem::path(root) / dir;
}

}  // namespace vfactor::app
