// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vfactor/algo/losses.hpp"
#include "vfactor/app/commands.hpp"
#include "vfactor/env/presets.hpp"
#include "vfactor/train/harness.hpp"

using namespace vfactor;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Episode budgets and the shared learning-rate anneal for the matrix-game runs.
constexpr std::size_t kVdnEpisodes = 20000;
constexpr double kMatrixFinalLr = 5e-5;
constexpr std::size_t kMatrixEpisodes = 30000;
constexpr std::size_t kRandomGameEpisodes = 10000;

struct Verdict {
  bool passed = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int precision = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << x;
  return os.str();
}

std::string sci(double x) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << x;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(VFACTOR_CLI_PATH) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

void collect_numbers(const nlohmann::json& j, const std::string& key, std::vector<double>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == key && it->is_number()) out.push_back(it->get<double>());
      collect_numbers(*it, key, out);
    }
  } else if (j.is_array()) {
    for (const auto& x : j) collect_numbers(x, key, out);
  }
}

Verdict check_suite(const std::string& suite, const std::string& key, bool want_max,
                    double bound) {
  const auto t0 = Clock::now();
  const CliResult r = run_cli("check --suite " + suite + " --seed 0");
  const double secs = seconds_since(t0);
  Verdict v;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(r.out);
  } catch (const std::exception& e) {
    v.detail = "unparseable output (exit " + std::to_string(r.status) + ")";
    return v;
  }
  std::vector<double> values;
  collect_numbers(j, key, values);
  std::size_t checks = 0;
  for (const auto& s : j["suites"]) checks += s["checks"].size();
  bool bound_ok = key.empty() || !values.empty();
  double extreme = 0.0;
  if (!values.empty()) {
    extreme = want_max ? *std::max_element(values.begin(), values.end())
                       : *std::min_element(values.begin(), values.end());
    bound_ok = want_max ? extreme < bound : extreme >= bound;
  }
  v.passed = r.status == 0 && j.value("passed", false) && bound_ok && secs < 60.0;
  v.detail = std::to_string(checks) + " checks, exit " + std::to_string(r.status) + ", " +
             (key.empty() ? "" : key + " " + sci(extreme) + ", ") + fmt(secs, 1) + "s";
  return v;
}

// ---------------------------------------------------------------------------
// Matrix-game runs shared by several criteria.

struct SeedRun {
  app::MatrixSeedResult result;
  double seconds = 0.0;
};

std::vector<SeedRun> run_matrix(const std::string& alg, std::size_t seeds, std::size_t episodes) {
  std::vector<SeedRun> runs;
  for (std::size_t k = 0; k < seeds; ++k) {
    app::MatrixOptions opts;
    opts.algorithm = alg;
    opts.first_seed = k;
    opts.episodes = episodes;
    opts.final_learning_rate = kMatrixFinalLr;
    // QTRAN++ matrix configuration: see README, "Matrix-game configuration".
    opts.detach_joint_inputs = alg == "qtranpp";
    opts.own_head_utilities = alg == "qtranpp";
    const auto t0 = Clock::now();
    auto rep = app::reproduce_matrix(opts);
    SeedRun run{std::move(rep.seeds.front()), seconds_since(t0)};
    std::cout << "    " << alg << " seed " << k << ": greedy " << run.result.greedy_label
              << ", return " << fmt(run.result.expected_return) << ", " << fmt(run.seconds, 1)
              << "s" << std::endl;
    runs.push_back(std::move(run));
  }
  return runs;
}

double max_seconds(const std::vector<SeedRun>& runs) {
  double m = 0.0;
  for (const auto& r : runs) m = std::max(m, r.seconds);
  return m;
}

std::size_t count_optimal(const std::vector<SeedRun>& runs, std::size_t first_n) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < std::min(first_n, runs.size()); ++i) {
    n += runs[i].result.greedy_label == "AA";
  }
  return n;
}

Verdict vdn_table() {
  const auto runs = run_matrix("vdn", 10, kVdnEpisodes);
  const std::array<double, 4> expected{2.0, 1.5, 1.5, 1.0};
  std::size_t good = 0;
  double worst = 0.0;
  for (const auto& r : runs) {
    double dev = 0.0;
    for (const auto& st : r.result.tables) {
      for (std::size_t j = 0; j < 4; ++j) dev = std::max(dev, std::abs(st.tables.q_jt[j] - expected[j]));
    }
    worst = std::max(worst, dev);
    good += dev <= 0.1 && r.result.greedy_label == "AA";
  }
  const double secs = max_seconds(runs);
  return {good >= 9 && secs <= 300.0,
          std::to_string(good) + "/10 seeds within 0.1 and greedy AA, worst deviation " +
              fmt(worst) + ", slowest seed " + fmt(secs, 1) + "s"};
}

Verdict qtranpp_optimality(const std::vector<SeedRun>& runs) {
  const std::size_t optimal = count_optimal(runs, 10);
  std::size_t low_violation = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& chain = runs[i].result.final_chain;
    double seed_worst = 0.0;
    for (const auto& h : chain->heads) seed_worst = std::max(seed_worst, h.mean_total);
    worst = std::max(worst, seed_worst);
    low_violation += seed_worst < 0.05;
  }
  double secs = 0.0;
  for (std::size_t i = 0; i < 10; ++i) secs = std::max(secs, runs[i].seconds);
  return {optimal >= 9 && low_violation == 10 && secs <= 600.0,
          std::to_string(optimal) + "/10 seeds greedy AA, " + std::to_string(low_violation) +
              "/10 seeds with every head's mean violation < 0.05 (worst " + fmt(worst) +
              "), slowest seed " + fmt(secs, 1) + "s"};
}

Verdict qmix_bimodality(const std::vector<SeedRun>& qmix, const std::vector<SeedRun>& qtranpp) {
  const std::size_t a = count_optimal(qmix, 20);
  const std::size_t b = count_optimal(qtranpp, 20);
  std::string labels;
  for (const auto& r : qmix) labels += r.result.greedy_label + ' ';
  const double secs = std::max(max_seconds(qmix), max_seconds(qtranpp));
  return {qmix.size() == 20 && qtranpp.size() == 20 && a <= b && secs <= 600.0,
          "QMIX " + std::to_string(a) + "/20 at AA [" + labels.substr(0, labels.size() - 1) +
              "], QTRAN++ " + std::to_string(b) + "/20, slowest seed " + fmt(secs, 1) + "s"};
}

// ---------------------------------------------------------------------------

ad::DiffValue constant_of(const ad::DiffValue& x) {
  return ad::DiffValue::constant(x.shape(), {x.data().begin(), x.data().end()});
}

Verdict denser_signal() {
  const auto t0 = Clock::now();
  algo::AlgorithmSpec spec;
  spec.validate();
  const env::EnvSpec env_spec = env::preset("nondec-2x2");
  auto env = env::make_environment(env_spec);
  const nets::ModelDims dims = train::dims_of(*env);

  std::size_t parameterizations = 0, attempts = 0, cases = 0, ours_nonzero = 0, original_zero = 0;
  for (std::uint64_t seed = 0; parameterizations < 1000 && attempts < 20000; ++seed, ++attempts) {
    nets::FactoredValueModel model(dims, nets::NetworkConfig{}, spec.architecture(), seed);
    std::mt19937_64 env_rng(seed * 2 + 1), explore_rng(seed * 2 + 2);
    std::vector<data::Episode> episodes;
    for (int i = 0; i < 16; ++i) {
      episodes.push_back(train::collect_episode(*env, model, model.params(), 1.0, env_rng, explore_rng));
    }
    std::vector<const data::Episode*> ptrs;
    for (const auto& e : episodes) ptrs.push_back(&e);
    const auto batch = data::EpisodeBatch::from_episodes(ptrs);
    const auto est = algo::estimate_batch(model, model.params(), model.params(), batch, spec.gamma);

    const auto jt_u = constant_of(est.q_jt_u);
    const auto jt_ubar = constant_of(est.q_jt_ubar);
    const auto filled = est.filled.data();
    bool counted = false;
    for (const auto& head : est.q_tran_u) {
      const auto ours = ad::DiffValue::parameter(head.shape(), {head.data().begin(), head.data().end()});
      const auto original = ad::DiffValue::parameter(head.shape(), {head.data().begin(), head.data().end()});
      ad::sum(algo::nopt_terms(jt_u, jt_ubar, ours, false)).backward();
      ad::sum(algo::original_nopt_terms(jt_u, original)).backward();
      for (std::size_t r = 0; r < est.rows; ++r) {
        const double a = jt_u.data()[r], b = jt_ubar.data()[r], c = head.data()[r];
        if (filled[r] == 0.0 || !(c > b && b > a)) continue;
        counted = true;
        ++cases;
        ours_nonzero += ours.grad()[r] != 0.0;
        original_zero += original.grad()[r] == 0.0;
      }
    }
    parameterizations += counted;
  }
  const double secs = seconds_since(t0);
  return {parameterizations == 1000 && ours_nonzero == cases && original_zero == cases && secs < 60.0,
          std::to_string(parameterizations) + " parameterizations (" + std::to_string(cases) +
              " entries) in the configuration: ours nonzero " + std::to_string(ours_nonzero) +
              ", original-loss zero " + std::to_string(original_zero) + ", " + fmt(secs, 1) + "s"};
}

Verdict violation_descent() {
  algo::AlgorithmSpec spec;
  spec.validate();
  std::size_t descended = 0;
  double slowest = 0.0;
  for (std::uint64_t g = 0; g < 20; ++g) {
    std::mt19937_64 game_rng = train::derive_stream(1000 + g, 0);
    const env::EnvSpec env_spec = env::random_matrix_game(2, 3, 2, true, game_rng);
    train::RunConfig run;
    run.seed = g;
    run.total_env_steps = kRandomGameEpisodes;
    run.full_exploration = true;
    run.evaluation_interval = kRandomGameEpisodes / 5;
    const auto t0 = Clock::now();
    const auto result = train::run_experiment(run, spec, nets::NetworkConfig{}, env_spec,
                                              "descent-" + std::to_string(g));
    const double secs = seconds_since(t0);
    slowest = std::max(slowest, secs);
    const double first = result.first_evaluation.chain->mean_total;
    const double last = result.final_evaluation.chain->mean_total;
    descended += last < first;
    std::cout << "    game " << g << ": violation " << fmt(first, 4) << " -> " << fmt(last, 4)
              << ", " << fmt(secs, 1) << "s" << std::endl;
  }
  return {descended >= 18 && slowest <= 180.0,
          std::to_string(descended) + "/20 games reduced the violation, slowest game " +
              fmt(slowest, 1) + "s"};
}

Verdict grid_learning() {
  const auto t0 = Clock::now();
  const env::EnvSpec env_spec = env::preset("grid-capture");
  auto env = env::make_environment(env_spec);
  std::mt19937_64 rng = train::derive_stream(7, 0);
  const auto random_returns = train::random_policy_returns(*env, 1000, rng);
  const double n = static_cast<double>(random_returns.size());
  const double mean = std::accumulate(random_returns.begin(), random_returns.end(), 0.0) / n;
  double var = 0.0;
  for (double r : random_returns) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / (n - 1.0));

  algo::AlgorithmSpec spec;
  spec.validate();
  train::RunConfig run;
  run.seed = 0;
  run.total_env_steps = 100000;
  run.evaluation_interval = 10000;
  run.evaluation_episodes = 100;
  run.exploration.anneal_steps = 50000;
  const auto result = train::run_experiment(run, spec, nets::NetworkConfig{}, env_spec, "grid");
  const double learned = result.final_evaluation.mean_return;
  const double secs = seconds_since(t0);
  return {learned >= mean + 3.0 * sd && secs <= 900.0,
          "learned " + fmt(learned) + " vs random " + fmt(mean) + " +/- " + fmt(sd) +
              " (threshold " + fmt(mean + 3.0 * sd) + "), " + fmt(secs, 1) + "s"};
}

Verdict determinism() {
  const auto t0 = Clock::now();
  const fs::path dir = fs::temp_directory_path() / "vfactor_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  algo::AlgorithmSpec spec;
  spec.validate();

  bool metrics_equal = true;
  for (const std::string name : {"nondec-2x2", "grid-capture"}) {
    const env::EnvSpec env_spec = env::preset(name);
    train::RunConfig run;
    run.seed = 11;
    run.total_env_steps = name == "nondec-2x2" ? 600 : 2000;
    run.evaluation_interval = run.total_env_steps / 3;
    run.full_exploration = name == "nondec-2x2";
    std::array<std::string, 2> text;
    for (int k = 0; k < 2; ++k) {
      const fs::path metrics = dir / (name + std::to_string(k) + ".csv");
      train::run_experiment(run, spec, nets::NetworkConfig{}, env_spec, "det", {metrics, {}});
      text[k] = slurp(metrics);
    }
    metrics_equal = metrics_equal && !text[0].empty() && text[0] == text[1];
  }

  app::MatrixOptions opts;
  opts.episodes = 600;
  opts.first_seed = 5;
  opts.out = dir / "repro";
  app::reproduce_matrix(opts);
  const auto model = train::model_from_checkpoint(opts.out / "checkpoint_5.bin");
  const env::EnvSpec env_spec = env::preset("nondec-2x2");
  const env::MatrixGame game(std::get<env::MatrixGameSpec>(env_spec));
  const auto reloaded = train::qtable_csv(train::matrix_tables(game, model, model.params()), 2, 2);
  const std::string saved = slurp(opts.out / "qtable_5.csv");
  const CliResult dumped =
      run_cli("dump-qtable --checkpoint " + (opts.out / "checkpoint_5.bin").string() +
              " --env nondec-2x2");
  const bool round_trip = !saved.empty() && reloaded == saved && dumped.status == 0 &&
                          dumped.out == saved;
  fs::remove_all(dir);
  return {metrics_equal && round_trip,
          std::string("rerun metrics ") + (metrics_equal ? "identical" : "DIFFER") +
              ", checkpoint Q-table dump " + (round_trip ? "identical" : "DIFFERS") + ", " +
              fmt(seconds_since(t0), 1) + "s"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Acceptance criteria"};
  std::vector<int> only;
  cli.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(cli, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  const auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  std::vector<SeedRun> qtranpp_runs, qmix_runs;
  const auto qtranpp = [&]() -> const std::vector<SeedRun>& {
    if (qtranpp_runs.empty()) qtranpp_runs = run_matrix("qtranpp", 20, kMatrixEpisodes);
    return qtranpp_runs;
  };

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient fidelity", [] { return check_suite("grad", "max_relative_error", true, 1e-4); }},
      {"monotonicity",
       [] { return check_suite("mono", "min_directional_derivative", false, -1e-8); }},
      {"decentralization sufficiency", [] { return check_suite("theorem1", "", true, 0.0); }},
      {"VDN matrix table", vdn_table},
      {"QTRAN++ optimality", [&] { return qtranpp_optimality(qtranpp()); }},
      {"QMIX bimodality",
       [&] {
         const auto& q = qtranpp();
         qmix_runs = run_matrix("qmix", 20, kMatrixEpisodes);
         return qmix_bimodality(qmix_runs, q);
       }},
      {"denser training signal", denser_signal},
      {"violation descent", violation_descent},
      {"grid-game learning", grid_learning},
      {"determinism and round-trips", determinism},
  };

  std::vector<std::string> lines;
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted(id)) continue;
    std::cout << "running criterion " << id << " (" << criteria[i].first << ")" << std::endl;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    all = all && v.passed;
    std::ostringstream line;
    line << (v.passed ? "PASS" : "FAIL") << " criterion " << std::setw(2) << id << " "
         << criteria[i].first << ": " << v.detail;
    std::cout << line.str() << std::endl;
    lines.push_back(line.str());
  }
  std::cout << "\nsummary\n";
  for (const auto& l : lines) std::cout << l << '\n';
  return all ? 0 : 1;
}
