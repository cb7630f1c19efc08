#include "vfactor/train/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "vfactor/autodiff/checkpoint.hpp"

namespace vfactor::train {
namespace {

constexpr std::uint64_t kEnvStream = 1;
constexpr std::uint64_t kExploreStream = 2;
constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kSampleStream = 4;
constexpr std::uint64_t kEvalStream = 5;
constexpr std::uint64_t kHeadStream = 6;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ad::DiffValue stack_observations(const env::EnvStep& step) {
  const std::size_t n = step.observations.size();
  const std::size_t o = n ? step.observations[0].size() : 0;
  std::vector<double> flat;
  flat.reserve(n * o);
  for (const auto& obs : step.observations) flat.insert(flat.end(), obs.begin(), obs.end());
  return ad::DiffValue::constant({n, o}, std::move(flat));
}

std::vector<std::vector<double>> rows_of(const ad::DiffValue& q) {
  std::vector<std::vector<double>> out(q.rows());
  auto d = q.data();
  for (std::size_t r = 0; r < q.rows(); ++r) {
    out[r].assign(d.begin() + static_cast<std::ptrdiff_t>(r * q.cols()),
                  d.begin() + static_cast<std::ptrdiff_t>((r + 1) * q.cols()));
  }
  return out;
}

void record_step(data::Episode& ep, const env::EnvStep& step) {
  for (const auto& obs : step.observations) ep.obs.insert(ep.obs.end(), obs.begin(), obs.end());
  ep.state.insert(ep.state.end(), step.state.begin(), step.state.end());
  for (const auto& mask : step.available_actions) {
    for (bool allowed : mask) ep.avail.push_back(allowed ? 1 : 0);
  }
}

int explore_action(const std::vector<bool>& mask, std::mt19937_64& rng) {
  std::vector<int> allowed;
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a]) allowed.push_back(static_cast<int>(a));
  }
  if (allowed.empty()) throw nets::MaskError("agent has no available action");
  std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
  return allowed[pick(rng)];
}

double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_double(const std::string& s) {
  if (s == "nan") return kNaN;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

}  // namespace

std::mt19937_64 derive_stream(std::uint64_t root_seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32),
                    static_cast<std::uint32_t>(stream_id)};
  return std::mt19937_64(seq);
}

RngStreams::RngStreams(std::uint64_t root_seed)
    : env(derive_stream(root_seed, kEnvStream)),
      explore(derive_stream(root_seed, kExploreStream)),
      init(derive_stream(root_seed, kInitStream)),
      sample(derive_stream(root_seed, kSampleStream)),
      eval(derive_stream(root_seed, kEvalStream)) {}

double ExplorationSchedule::operator()(std::size_t env_steps) const {
  if (anneal_steps == 0 || env_steps >= anneal_steps) return eps_end;
  const double frac = static_cast<double>(env_steps) / static_cast<double>(anneal_steps);
  return eps_start + frac * (eps_end - eps_start);
}

void RunConfig::validate() const {
  if (train_interval < 1) throw std::invalid_argument("run.train_interval must be >= 1");
  if (evaluation_interval < 1) throw std::invalid_argument("run.evaluation_interval must be >= 1");
  if (evaluation_episodes < 1) throw std::invalid_argument("run.evaluation_episodes must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("run.batch_size must be >= 1");
  if (buffer_capacity < batch_size) {
    throw std::invalid_argument("run.buffer_capacity must be at least run.batch_size");
  }
  const auto in_unit = [](double e) { return e >= 0.0 && e <= 1.0; };
  if (!in_unit(exploration.eps_start) || !in_unit(exploration.eps_end) ||
      exploration.eps_end > exploration.eps_start) {
    throw std::invalid_argument("exploration needs 0 <= eps_end <= eps_start <= 1");
  }
  if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("optimizer.lr must be positive");
  if (!(optimizer.decay >= 0.0 && optimizer.decay < 1.0)) {
    throw std::invalid_argument("optimizer.decay must lie in [0, 1)");
  }
  if (!(optimizer.epsilon > 0.0)) throw std::invalid_argument("optimizer.eps must be positive");
  if (!(final_learning_rate >= 0.0) || !std::isfinite(final_learning_rate)) {
    throw std::invalid_argument("optimizer.lr_final must be a non-negative number");
  }
}

double RunConfig::learning_rate_at(std::size_t env_steps) const {
  if (final_learning_rate <= 0.0 || total_env_steps == 0) return optimizer.learning_rate;
  const double f = std::min(1.0, static_cast<double>(env_steps) / static_cast<double>(total_env_steps));
  return optimizer.learning_rate + f * (final_learning_rate - optimizer.learning_rate);
}

nets::ModelDims dims_of(const env::Environment& env) {
  return {env.num_agents(), env.num_actions(), env.obs_dim(), env.state_dim()};
}

data::Episode collect_episode(env::Environment& env, const nets::FactoredValueModel& model,
                              const ad::ParameterStore& store, double epsilon,
                              std::mt19937_64& env_rng, std::mt19937_64& explore_rng) {
  ad::NoGradGuard no_grad;
  const std::size_t N = env.num_agents();
  data::Episode ep;
  ep.num_agents = N;
  ep.num_actions = env.num_actions();
  ep.obs_dim = env.obs_dim();
  ep.state_dim = env.state_dim();

  env::EnvStep step = env.reset(env_rng);
  record_step(ep, step);
  ad::GruState hidden = model.utility().initial_state(N);
  std::bernoulli_distribution coin(epsilon);
  while (true) {
    auto [q, next_hidden] = model.utility().step(store, stack_observations(step), hidden);
    hidden = std::move(next_hidden);
    std::vector<std::uint8_t> avail;
    for (const auto& mask : step.available_actions) {
      for (bool a : mask) avail.push_back(a ? 1 : 0);
    }
    const auto greedy = nets::greedy_actions(q, avail);
    std::vector<int> joint(N);
    for (std::size_t i = 0; i < N; ++i) {
      joint[i] = coin(explore_rng) ? explore_action(step.available_actions[i], explore_rng)
                                   : static_cast<int>(greedy[i]);
    }
    step = env.step(joint, env_rng);
    ep.actions.insert(ep.actions.end(), joint.begin(), joint.end());
    ep.rewards.push_back(step.reward);
    ep.terminal.push_back(step.terminated && !step.truncated ? 1 : 0);
    ++ep.length;
    record_step(ep, step);
    if (step.terminated) break;
  }
  return ep;
}

Trainer::Trainer(nets::FactoredValueModel& model, algo::AlgorithmSpec spec,
                 ad::RmsPropConfig optimizer, std::size_t batch_size, std::mt19937_64 sample_rng)
    : model_(model),
      spec_(spec),
      optimizer_(optimizer),
      batch_size_(batch_size),
      sample_rng_(std::move(sample_rng)),
      head_rng_(sample_rng_()),
      target_(model.params().clone()) {
  spec_.validate();
  target_.set_requires_grad(false);
}

algo::LossBreakdown Trainer::train_step(const EpisodeBuffer& buffer) {
  return train_on(buffer.sample(batch_size_, sample_rng_));
}

algo::LossBreakdown Trainer::train_on(const data::EpisodeBatch& batch) {
  algo::LossBreakdown out = algo::combined_loss(model_, model_.params(), target_, batch, spec_,
                                                &head_rng_);
  model_.params().zero_grad();
  out.total_node.backward();
  ad::rmsprop_step(model_.params(), optimizer_);
  ++steps_;
  if (steps_ % spec_.target_update_period == 0) target_.copy_values_from(model_.params());
  out.total_node = {};
  return out;
}

std::vector<StateTables> matrix_tables(const env::MatrixGame& game,
                                       const nets::FactoredValueModel& model,
                                       const ad::ParameterStore& store) {
  ad::NoGradGuard no_grad;
  std::vector<StateTables> out;
  for (std::size_t k = 0; k < game.spec().states.size(); ++k) {
    const env::EnvStep step = game.observe_state(k);
    auto [q, _] = model.utility().step(store, stack_observations(step),
                                       model.utility().initial_state(game.num_agents()));
    out.push_back({k, algo::joint_tables(model, store, step.state, rows_of(q),
                                         step.available_actions)});
  }
  return out;
}

EvaluationResult evaluate(env::Environment& env, const nets::FactoredValueModel& model,
                          const ad::ParameterStore& store, std::size_t episodes,
                          std::mt19937_64& rng) {
  ad::NoGradGuard no_grad;
  EvaluationResult out;
  const std::size_t N = env.num_agents();
  const std::size_t heads = model.num_heads();
  algo::ChainAccumulator chain(heads);
  const env::MatrixGame* matrix = env.as_matrix_game();

  for (std::size_t e = 0; e < episodes; ++e) {
    env::EnvStep step = env.reset(rng);
    ad::GruState hidden = model.utility().initial_state(N);
    double ret = 0.0;
    while (true) {
      auto [q, next_hidden] = model.utility().step(store, stack_observations(step), hidden);
      hidden = std::move(next_hidden);
      const auto q_vectors = rows_of(q);
      const auto joint = nets::greedy_joint_action(q_vectors, step.available_actions);
      if (heads > 0 && matrix == nullptr) {
        const auto t = algo::joint_tables(model, store, step.state, q_vectors, step.available_actions);
        chain.add_table(t.q_jt, t.q_tran, t.greedy_index);
      }
      step = env.step(joint, rng);
      ret += step.reward;
      if (step.terminated) break;
    }
    out.returns.push_back(ret);
  }
  for (double r : out.returns) out.mean_return += r;
  if (!out.returns.empty()) out.mean_return /= static_cast<double>(out.returns.size());
  out.return_std = stddev(out.returns);

  if (matrix != nullptr) {
    out.tables = matrix_tables(*matrix, model, store);
    std::vector<std::string> labels;
    for (const auto& st : out.tables) {
      out.greedy_per_state.push_back(st.tables.greedy);
      const std::string label = env::joint_label(st.tables.greedy);
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
      if (heads > 0) chain.add_table(st.tables.q_jt, st.tables.q_tran, st.tables.greedy_index);
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out.greedy_label += (i ? "|" : "") + labels[i];
    }
  } else {
    out.greedy_label = "-";
  }
  if (heads > 0 && chain.tables() > 0) {
    out.chain = chain.result();
    out.chain->structurally_monotone =
        model.architecture().transformed != nets::TransformedKind::None;
  }
  return out;
}

std::vector<double> random_policy_returns(env::Environment& env, std::size_t episodes,
                                          std::mt19937_64& rng) {
  std::vector<double> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    env::EnvStep step = env.reset(rng);
    double ret = 0.0;
    while (true) {
      std::vector<int> joint;
      for (const auto& mask : step.available_actions) joint.push_back(explore_action(mask, rng));
      step = env.step(joint, rng);
      ret += step.reward;
      if (step.terminated) break;
    }
    out.push_back(ret);
  }
  return out;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "run_id",     "seed",       "env_steps",  "episodes",   "epsilon",
      "l_td",       "l_opt",      "l_nopt",     "total_loss", "eval_return",
      "greedy_action", "viol_eq_ab", "viol_gt_ac", "viol_gt_cd", "viol_gt_ad"};
  return cols;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    out << r.run_id << ',' << r.seed << ',' << r.env_steps << ',' << r.episodes << ','
        << format_double(r.epsilon) << ',' << format_double(r.l_td) << ','
        << format_double(r.l_opt) << ',' << format_double(r.l_nopt) << ','
        << format_double(r.total_loss) << ',' << format_double(r.eval_return) << ','
        << r.greedy_action << ',' << format_double(r.viol_eq_ab) << ','
        << format_double(r.viol_gt_ac) << ',' << format_double(r.viol_gt_cd) << ','
        << format_double(r.viol_gt_ad) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::string expected;
  for (const auto& c : metrics_columns()) expected += (expected.empty() ? "" : ",") + c;
  if (line != expected) throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<MetricsRecord> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != metrics_columns().size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(metrics_columns().size()) + " fields");
    }
    MetricsRecord r;
    r.run_id = f[0];
    r.seed = std::stoull(f[1]);
    r.env_steps = std::stoull(f[2]);
    r.episodes = std::stoull(f[3]);
    r.epsilon = parse_double(f[4]);
    r.l_td = parse_double(f[5]);
    r.l_opt = parse_double(f[6]);
    r.l_nopt = parse_double(f[7]);
    r.total_loss = parse_double(f[8]);
    r.eval_return = parse_double(f[9]);
    r.greedy_action = f[10];
    r.viol_eq_ab = parse_double(f[11]);
    r.viol_gt_ac = parse_double(f[12]);
    r.viol_gt_cd = parse_double(f[13]);
    r.viol_gt_ad = parse_double(f[14]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string qtable_csv(const std::vector<StateTables>& tables, std::size_t num_agents,
                       std::size_t num_actions) {
  std::ostringstream os;
  os << "state,joint_action,estimator,value\n";
  for (const auto& st : tables) {
    const auto& t = st.tables;
    for (std::size_t j = 0; j < t.q_jt.size(); ++j) {
      const std::string label = env::joint_label(env::joint_from_index(j, num_agents, num_actions));
      os << st.state << ',' << label << ",q_jt," << format_double(t.q_jt[j]) << '\n';
      for (std::size_t h = 0; h < t.q_tran.size(); ++h) {
        os << st.state << ',' << label << ",q_tran_" << h << ',' << format_double(t.q_tran[h][j])
           << '\n';
      }
    }
  }
  return os.str();
}

namespace {

MetricsRecord make_record(const std::string& run_id, std::uint64_t seed, std::size_t env_steps,
                          std::size_t episodes, double epsilon,
                          const std::optional<algo::LossBreakdown>& loss,
                          const EvaluationResult& eval) {
  MetricsRecord r;
  r.run_id = run_id;
  r.seed = seed;
  r.env_steps = env_steps;
  r.episodes = episodes;
  r.epsilon = epsilon;
  r.l_td = loss ? loss->l_td : kNaN;
  r.l_opt = loss ? loss->l_opt : kNaN;
  r.l_nopt = loss ? loss->l_nopt : kNaN;
  r.total_loss = loss ? loss->total : kNaN;
  r.eval_return = eval.mean_return;
  r.greedy_action = eval.greedy_label;
  if (eval.chain) {
    r.viol_eq_ab = eval.chain->eq_ab.mean;
    r.viol_gt_ac = eval.chain->gt_ac.mean;
    r.viol_gt_cd = eval.chain->gt_cd.mean;
    r.viol_gt_ad = eval.chain->gt_ad.mean;
  } else {
    r.viol_eq_ab = r.viol_gt_ac = r.viol_gt_cd = r.viol_gt_ad = kNaN;
  }
  return r;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& config, const algo::AlgorithmSpec& spec,
                                const nets::NetworkConfig& network, const env::EnvSpec& env_spec,
                                const std::string& run_id, const ExperimentOutput& output) {
  config.validate();
  spec.validate();
  RngStreams rng(config.seed);
  auto env = env::make_environment(env_spec);
  auto eval_env = env::make_environment(env_spec);
  nets::FactoredValueModel model(dims_of(*env), network, spec.architecture(), rng.init);
  EpisodeBuffer buffer(config.buffer_capacity);
  Trainer trainer(model, spec, config.optimizer, config.batch_size, std::move(rng.sample));

  ExperimentResult result;
  std::optional<algo::LossBreakdown> last_loss;
  std::size_t env_steps = 0;
  std::size_t episodes = 0;
  const auto epsilon_at = [&](std::size_t steps) {
    return config.full_exploration ? 1.0 : config.exploration(steps);
  };

  auto record = [&]() {
    EvaluationResult eval = evaluate(*eval_env, model, model.params(), config.evaluation_episodes,
                                     rng.eval);
    result.records.push_back(
        make_record(run_id, config.seed, env_steps, episodes, epsilon_at(env_steps), last_loss, eval));
    return eval;
  };

  result.first_evaluation = record();
  std::size_t last_eval = 0;
  bool evaluated_now = true;
  while (env_steps < config.total_env_steps) {
    data::Episode ep = collect_episode(*env, model, model.params(), epsilon_at(env_steps), rng.env,
                                       rng.explore);
    env_steps += ep.length;
    ++episodes;
    buffer.add(std::move(ep));
    evaluated_now = false;
    if (buffer.size() >= config.batch_size && episodes % config.train_interval == 0) {
      trainer.set_learning_rate(config.learning_rate_at(env_steps));
      last_loss = trainer.train_step(buffer);
    }
    if (env_steps - last_eval >= config.evaluation_interval) {
      last_eval = env_steps;
      result.final_evaluation = record();
      evaluated_now = true;
    }
  }
  if (!evaluated_now) result.final_evaluation = record();
  if (result.records.size() == 1) result.final_evaluation = result.first_evaluation;

  if (!output.metrics_path.empty()) write_metrics_csv(output.metrics_path, result.records);
  if (!output.checkpoint_path.empty()) {
    ad::save_checkpoint(output.checkpoint_path,
                        ad::snapshot(model.params(), checkpoint_metadata(spec, network, model.dims())));
  }
  return result;
}

std::map<std::string, std::string> checkpoint_metadata(const algo::AlgorithmSpec& spec,
                                                       const nets::NetworkConfig& network,
                                                       const nets::ModelDims& dims) {
  const auto arch = spec.architecture();
  return {
      {"family", algo::to_string(spec.family)},
      {"ablation", algo::to_string(spec.ablation)},
      {"joint", nets::to_string(arch.joint)},
      {"transformed", nets::to_string(arch.transformed)},
      {"num_agents", std::to_string(dims.num_agents)},
      {"num_actions", std::to_string(dims.num_actions)},
      {"obs_dim", std::to_string(dims.obs_dim)},
      {"state_dim", std::to_string(dims.state_dim)},
      {"embed_width", std::to_string(network.embed_width)},
      {"gru_width", std::to_string(network.gru_width)},
      {"mixer_width", std::to_string(network.mixer_width)},
      {"hyper_width", std::to_string(network.hyper_width)},
      {"feedforward_width", std::to_string(network.feedforward_width)},
      {"value_width", std::to_string(network.value_width)},
      {"heterogeneous", network.heterogeneous ? "true" : "false"},
  };
}

nets::FactoredValueModel model_from_checkpoint(const std::filesystem::path& path) {
  const ad::Checkpoint ckpt = ad::load_checkpoint(path);
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = ckpt.metadata.find(key);
    if (it == ckpt.metadata.end()) {
      throw ad::CheckpointError(path.string() + ": missing metadata key '" + key + "'");
    }
    return it->second;
  };
  auto num = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(get(key))); };
  nets::ModelDims dims{num("num_agents"), num("num_actions"), num("obs_dim"), num("state_dim")};
  nets::NetworkConfig net;
  net.embed_width = num("embed_width");
  net.gru_width = num("gru_width");
  net.mixer_width = num("mixer_width");
  net.hyper_width = num("hyper_width");
  net.feedforward_width = num("feedforward_width");
  net.value_width = num("value_width");
  net.heterogeneous = get("heterogeneous") == "true";
  nets::Architecture arch{nets::joint_kind_from_string(get("joint")),
                          nets::transformed_kind_from_string(get("transformed"))};
  nets::FactoredValueModel model(dims, net, arch, std::uint64_t{0});
  ad::restore(model.params(), ckpt);
  return model;
}

}  // namespace vfactor::train
