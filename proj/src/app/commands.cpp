#include "vfactor/app/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <ostream>

#include "vfactor/app/checks.hpp"
#include "vfactor/app/config.hpp"
#include "vfactor/autodiff/checkpoint.hpp"

namespace vfactor::app {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string action_letter(std::size_t a) { return std::string(1, static_cast<char>('A' + a)); }

void print_table(std::ostream& os, const std::string& title, const std::vector<double>& values,
                 std::size_t num_actions) {
  os << "  " << title << '\n';
  os << "        ";
  for (std::size_t c = 0; c < num_actions; ++c) os << std::setw(9) << action_letter(c);
  os << '\n';
  for (std::size_t r = 0; r < num_actions; ++r) {
    os << "      " << action_letter(r) << ' ';
    for (std::size_t c = 0; c < num_actions; ++c) {
      os << std::setw(9) << std::fixed << std::setprecision(3) << values[r * num_actions + c];
    }
    os << '\n';
  }
  os.unsetf(std::ios::floatfield);
}

algo::AlgorithmSpec spec_for(const MatrixOptions& options) {
  algo::AlgorithmSpec spec;
  spec.family = algo::family_from_string(options.algorithm);
  spec.ablation = options.ablation;
  spec.detach_joint_inputs = options.detach_joint_inputs;
  spec.own_head_utilities = options.own_head_utilities;
  spec.validate();
  return spec;
}

}  // namespace

void print_matrix_tables(std::ostream& os, const std::vector<train::StateTables>& tables,
                         std::size_t num_actions) {
  for (const auto& st : tables) {
    os << "state " << st.state << " (greedy " << env::joint_label(st.tables.greedy) << ")\n";
    // Only the 2-agent layout is printable as a matrix.
    if (st.tables.q_jt.size() != num_actions * num_actions) {
      os << "  (" << st.tables.q_jt.size() << " joint actions, see the CSV dump)\n";
      continue;
    }
    print_table(os, "Q_jt", st.tables.q_jt, num_actions);
    for (std::size_t h = 0; h < st.tables.q_tran.size(); ++h) {
      print_table(os, "Q_tran head " + std::to_string(h), st.tables.q_tran[h], num_actions);
    }
  }
}

MatrixReproduction reproduce_matrix(const MatrixOptions& options) {
  const algo::AlgorithmSpec spec = spec_for(options);
  const env::EnvSpec env_spec = env::preset("nondec-2x2");
  const auto& game = std::get<env::MatrixGameSpec>(env_spec);

  MatrixReproduction rep;
  rep.algorithm = options.algorithm;
  if (!options.out.empty()) fs::create_directories(options.out);
  for (std::size_t k = 0; k < options.seeds; ++k) {
    train::RunConfig run;
    run.seed = options.first_seed + k;
    run.total_env_steps = options.episodes;
    run.full_exploration = true;
    run.final_learning_rate = options.final_learning_rate;
    run.evaluation_interval = std::max<std::size_t>(1, options.episodes / 10);
    run.validate();

    train::ExperimentOutput output;
    if (!options.out.empty()) {
      output.metrics_path = options.out / ("metrics_" + std::to_string(run.seed) + ".csv");
      output.checkpoint_path = options.out / ("checkpoint_" + std::to_string(run.seed) + ".bin");
    }
    const std::string run_id = options.algorithm + "-" + std::to_string(run.seed);
    auto result = train::run_experiment(run, spec, nets::NetworkConfig{}, env_spec, run_id, output);

    MatrixSeedResult s;
    s.seed = run.seed;
    s.tables = result.final_evaluation.tables;
    // Hidden state: one greedy joint action for every latent state.
    const auto& greedy = result.final_evaluation.greedy_per_state.front();
    s.greedy_label = env::joint_label(greedy);
    s.expected_return = env::expected_return_of_joint_action(game, greedy);
    s.records = std::move(result.records);
    s.first_chain = result.first_evaluation.chain;
    s.final_chain = result.final_evaluation.chain;
    if (s.greedy_label == "AA") ++rep.optimal_seeds;
    if (!options.out.empty()) {
      write_text(options.out / ("qtable_" + std::to_string(run.seed) + ".csv"),
                 train::qtable_csv(s.tables, game.num_agents, game.actions_per_agent));
    }
    rep.seeds.push_back(std::move(s));
  }
  if (!options.out.empty()) {
    std::ofstream summary(options.out / "summary.csv");
    summary << "seed,greedy_action,expected_return\n" << std::setprecision(17);
    for (const auto& s : rep.seeds) {
      summary << s.seed << ',' << s.greedy_label << ',' << s.expected_return << '\n';
    }
  }
  return rep;
}

int cmd_train(const fs::path& config_path, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    const fs::path dir = resolve_output_dir(cfg.output_dir);
    fs::create_directories(dir);
    write_text(dir / "resolved_config.yaml", resolved_config_text(cfg));
    for (const auto seed : cfg.seeds) {
      train::RunConfig run = cfg.run;
      run.seed = seed;
      train::ExperimentOutput output{dir / ("metrics_" + std::to_string(seed) + ".csv"),
                                     dir / ("checkpoint_" + std::to_string(seed) + ".bin")};
      const std::string run_id = algo::to_string(cfg.algorithm.family) + "-" + std::to_string(seed);
      const auto result =
          train::run_experiment(run, cfg.algorithm, cfg.network, cfg.env, run_id, output);
      const auto& last = result.records.back();
      out << "seed " << seed << ": env_steps=" << last.env_steps << " eval_return=" << last.eval_return
          << " greedy=" << last.greedy_action << " -> " << output.metrics_path.string() << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_reproduce_matrix(const MatrixOptions& options, std::ostream& out, std::ostream& err) {
  MatrixOptions opts = options;
  try {
    spec_for(opts);
  } catch (const std::exception& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (!opts.out.empty()) opts.out = resolve_output_dir(opts.out);
  try {
    const auto rep = reproduce_matrix(opts);
    for (const auto& s : rep.seeds) {
      out << "== " << rep.algorithm << " seed " << s.seed << ": greedy " << s.greedy_label
          << ", expected return " << s.expected_return << '\n';
      print_matrix_tables(out, s.tables, 2);
    }
    out << "summary: " << rep.optimal_seeds << "/" << rep.seeds.size() << " seeds at AA, "
        << rep.seeds.size() - rep.optimal_seeds << " elsewhere\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_check(const std::string& suite, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  std::vector<SuiteReport> reports;
  try {
    reports = run_suites(suite, seed);
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  nlohmann::json j;
  j["seed"] = seed;
  j["suites"] = nlohmann::json::array();
  bool ok = true;
  for (const auto& r : reports) {
    j["suites"].push_back(r.to_json());
    ok = ok && r.passed();
    for (const auto& c : r.checks) {
      if (!c.passed) err << "FAILED " << r.suite << ": " << c.name << " " << c.details.dump() << '\n';
    }
  }
  j["passed"] = ok;
  out << j.dump(2) << '\n';
  return ok ? kExitOk : kExitFailure;
}

int cmd_dump_qtable(const fs::path& checkpoint, const std::string& preset, std::ostream& out,
                    std::ostream& err) {
  std::unique_ptr<env::Environment> env;
  try {
    env = env::make_environment(env::preset(preset));
  } catch (const std::exception& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  const auto* game = env->as_matrix_game();
  if (game == nullptr) {
    err << "usage error: dump-qtable needs a matrix-game preset, got '" << preset << "'\n";
    return kExitUsage;
  }
  try {
    const auto model = train::model_from_checkpoint(checkpoint);
    const auto& d = model.dims();
    const auto e = train::dims_of(*env);
    if (d.num_agents != e.num_agents || d.num_actions != e.num_actions || d.obs_dim != e.obs_dim ||
        d.state_dim != e.state_dim) {
      err << "error: checkpoint dimensions do not match preset '" << preset << "'\n";
      return kExitFailure;
    }
    out << train::qtable_csv(train::matrix_tables(*game, model, model.params()), d.num_agents,
                             d.num_actions);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Cooperative multi-agent value factorization"};
  app.require_subcommand(1);

  fs::path config_path;
  auto* train = app.add_subcommand("train", "Train every seed of a config file");
  train->add_option("--config", config_path, "Experiment config (YAML)")->required();

  MatrixOptions matrix;
  std::string ablation = "none";
  auto* repro = app.add_subcommand("reproduce-matrix", "Train on nondec-2x2 and print Q-tables");
  repro->add_option("--alg", matrix.algorithm, "vdn, qmix, qtran or qtranpp")->required();
  repro->add_option("--seeds", matrix.seeds, "Number of seeds")->check(CLI::PositiveNumber);
  repro->add_option("--out", matrix.out, "Output directory");
  repro->add_option("--episodes", matrix.episodes, "Training episodes per seed")
      ->check(CLI::PositiveNumber);
  repro->add_option("--first-seed", matrix.first_seed, "Root seed of the first run");
  repro->add_option("--ablation", ablation, "QTRAN++ ablation: none, mix, fc, lb, fix");
  repro->add_option("--lr-final", matrix.final_learning_rate,
                    "Anneal the learning rate linearly to this value")
      ->check(CLI::NonNegativeNumber);
  repro->add_flag("--detach-joint-inputs", matrix.detach_joint_inputs,
                  "L_opt / L_nopt see Q_jt on detached utilities");
  repro->add_flag("--own-head-utilities", matrix.own_head_utilities,
                  "Head i trains only q_i");

  std::string suite;
  std::uint64_t check_seed = 0;
  auto* check = app.add_subcommand("check", "Run property suites, JSON summary on stdout");
  check->add_option("--suite", suite, "grad, mono, theorem1 or all")->required();
  check->add_option("--seed", check_seed, "Instance seed");

  fs::path checkpoint;
  std::string preset;
  auto* dump = app.add_subcommand("dump-qtable", "Print the Q-tables of a checkpoint as CSV");
  dump->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  dump->add_option("--env", preset, "Matrix-game preset")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (train->parsed()) return cmd_train(config_path, std::cout, std::cerr);
  if (repro->parsed()) {
    try {
      matrix.ablation = algo::ablation_from_string(ablation);
    } catch (const std::exception& e) {
      std::cerr << "usage error: " << e.what() << '\n';
      return kExitUsage;
    }
    return cmd_reproduce_matrix(matrix, std::cout, std::cerr);
  }
  if (check->parsed()) return cmd_check(suite, check_seed, std::cout, std::cerr);
  return cmd_dump_qtable(checkpoint, preset, std::cout, std::cerr);
}

}  // namespace vfactor::app
