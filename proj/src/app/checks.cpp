#include "vfactor/app/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "vfactor/algo/condition_chain.hpp"
#include "vfactor/algo/losses.hpp"
#include "vfactor/autodiff/gradcheck.hpp"
#include "vfactor/autodiff/layers.hpp"
#include "vfactor/env/matrix_game.hpp"
#include "vfactor/nets/model.hpp"

namespace vfactor::app {
namespace {

using ad::DiffValue;
using ad::ParameterStore;
using Rng = std::mt19937_64;

std::vector<double> normal_values(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

ad::ParamId add_input(ParameterStore& store, const std::string& name, ad::Shape shape, Rng& rng,
                      double scale = 1.0) {
  return store.add(name, shape, normal_values(shape.size(), rng, scale));
}

class GradSuite {
 public:
  GradSuite(std::uint64_t seed, double tolerance) : rng_(seed), tolerance_(tolerance) {}

  void check(const std::string& name, ParameterStore& store, const ad::ScalarObjective& f) {
    const auto report = ad::finite_difference_report(f, store);
    CheckOutcome out;
    out.name = name;
    out.passed = report.max_relative_error < tolerance_;
    out.details = {{"max_relative_error", report.max_relative_error},
                   {"worst_parameter", report.worst_parameter},
                   {"worst_element", report.worst_element},
                   {"analytic", report.analytic},
                   {"numeric", report.numeric},
                   {"elements", report.checked_elements}};
    report_.checks.push_back(std::move(out));
  }

  SuiteReport run() {
    report_.suite = "grad";
    elementwise();
    structural();
    layers();
    gru();
    estimators();
    losses();
    double worst = 0.0;
    for (const auto& c : report_.checks) {
      worst = std::max(worst, c.details.value("max_relative_error", 0.0));
    }
    CheckOutcome summary;
    summary.name = "overall";
    summary.passed = worst < tolerance_;
    summary.details = {{"max_relative_error", worst}, {"tolerance", tolerance_}};
    report_.checks.push_back(std::move(summary));
    return std::move(report_);
  }

 private:
  void elementwise() {
    ParameterStore s;
    const auto a = add_input(s, "a", {3, 4}, rng_);
    const auto b = add_input(s, "b", {3, 4}, rng_);
    const auto row = add_input(s, "row", {1, 4}, rng_);
    const auto col = add_input(s, "col", {3, 1}, rng_);
    const auto w1 = DiffValue::constant({3, 4}, normal_values(12, rng_));
    const auto w2 = DiffValue::constant({3, 4}, normal_values(12, rng_));
    check("unary ops", s, [&](const ParameterStore& p) {
      const DiffValue x = p[a];
      DiffValue total = ad::sum(ad::relu(x) * w1) + ad::sum(ad::elu(x) * w2);
      total = total + ad::sum(ad::sigmoid(x) * w2) + ad::sum(ad::tanh(x) * w1);
      total = total + ad::sum(ad::abs(x) * w1) + ad::sum(ad::square(x) * w2);
      return total + ad::mean(ad::scale(ad::add_scalar(x, 0.5), 1.7));
    });
    check("broadcast binary ops", s, [&](const ParameterStore& p) {
      DiffValue out = (p[a] + p[row]) * (p[b] - p[col]);
      out = out + p[a] * p[col] - p[row];
      return ad::sum(out * w1);
    });
    check("maximum", s, [&](const ParameterStore& p) {
      return ad::sum(ad::maximum(p[a], p[b]) * w1);
    });
    check("clip with live bounds", s, [&](const ParameterStore& p) {
      const DiffValue lo = ad::sub(p[a], ad::abs(p[b]));
      const DiffValue hi = ad::add(p[a], ad::abs(p[b]));
      const DiffValue x = ad::scale(p[b], 1.3) + p[a];
      return ad::sum(ad::clip(x, lo, hi) * w2);
    });
  }

  void structural() {
    ParameterStore s;
    const auto a = add_input(s, "a", {4, 3}, rng_);
    const auto b = add_input(s, "b", {3, 5}, rng_);
    const auto c = add_input(s, "c", {4, 2}, rng_);
    const auto wm = DiffValue::constant({4, 5}, normal_values(20, rng_));
    check("matmul", s, [&](const ParameterStore& p) { return ad::sum(ad::matmul(p[a], p[b]) * wm); });
    check("reductions", s, [&](const ParameterStore& p) {
      return ad::sum(ad::square(ad::sum_cols(p[a]))) + ad::mean(p[b]) * ad::sum(p[c]);
    });
    check("concat, slice and gather", s, [&](const ParameterStore& p) {
      const DiffValue cat = ad::concat_cols(std::vector<DiffValue>{p[a], p[c]});
      const DiffValue mid = ad::slice_cols(cat, 1, 4);
      const std::vector<std::size_t> rows{3, 0, 0, 2};
      const DiffValue gathered = ad::gather_rows(mid, rows);
      const DiffValue stacked = ad::concat_rows(std::vector<DiffValue>{gathered, mid});
      return ad::sum(ad::square(stacked));
    });
    check("pick and reshape", s, [&](const ParameterStore& p) {
      const std::vector<std::size_t> idx{2, 0, 1, 2};
      const DiffValue picked = ad::pick_cols(p[a], idx);
      const DiffValue flat = ad::reshape(p[c], {2, 4});
      return ad::sum(ad::square(ad::reshape(picked, {2, 2}))) + ad::sum(ad::tanh(flat) * ad::tanh(flat));
    });
  }

  void layers() {
    ParameterStore s;
    const ad::Linear lin(s, "linear", 3, 4, rng_);
    const ad::TwoLayerMlp mlp(s, "mlp", 3, 6, 2, rng_);
    const auto x = add_input(s, "x", {5, 3}, rng_);
    const auto w = DiffValue::constant({5, 4}, normal_values(20, rng_));
    const auto w2 = DiffValue::constant({5, 2}, normal_values(10, rng_));
    check("linear and two-layer mlp", s, [&](const ParameterStore& p) {
      return ad::sum(lin.forward(p, p[x]) * w) + ad::sum(mlp.forward(p, p[x]) * w2);
    });
  }

  void gru() {
    ParameterStore s;
    const ad::GruCell cell(s, "gru", 3, 4, rng_);
    std::vector<ad::ParamId> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(add_input(s, "x" + std::to_string(t), {2, 3}, rng_));
    const auto h0 = add_input(s, "h0", {2, 4}, rng_, 0.5);
    const auto w = DiffValue::constant({2, 4}, normal_values(8, rng_));
    check("gru bptt over 3 steps", s, [&](const ParameterStore& p) {
      ad::GruState h{p[h0]};
      DiffValue total = DiffValue::scalar(0.0);
      for (const auto& x : xs) {
        auto [out, next] = cell.forward(p, p[x], h);
        total = total + ad::sum(out * w);
        h = next;
      }
      return total;
    });
  }

  static nets::NetworkConfig small_config(bool heterogeneous = false) {
    nets::NetworkConfig c;
    c.embed_width = 6;
    c.gru_width = 5;
    c.mixer_width = 4;
    c.hyper_width = 6;
    c.feedforward_width = 6;
    c.value_width = 5;
    c.heterogeneous = heterogeneous;
    return c;
  }

  void estimators() {
    const nets::ModelDims dims{3, 2, 4, 3};
    struct Case {
      std::string name;
      nets::Architecture arch;
      bool heterogeneous;
    };
    using nets::JointKind;
    using nets::TransformedKind;
    const std::vector<Case> cases = {
        {"monotonic mixer (qmix)", {JointKind::Monotonic, TransformedKind::None}, false},
        {"semi-monotonic joint + multi-head", {JointKind::SemiMonotonic, TransformedKind::MultiHead}, false},
        {"heterogeneous mixers", {JointKind::SemiMonotonic, TransformedKind::MultiHead}, true},
        {"feed-forward joint + single head", {JointKind::FeedForward, TransformedKind::SingleHead}, false},
        {"additive transformed", {JointKind::FeedForward, TransformedKind::Additive}, false},
    };
    for (const auto& c : cases) {
      nets::FactoredValueModel model(dims, small_config(c.heterogeneous), c.arch, rng_());
      ParameterStore& s = model.params();
      const auto q = add_input(s, "input.q", {5, dims.num_agents}, rng_);
      const auto st = add_input(s, "input.state", {5, dims.state_dim}, rng_);
      const auto wj = DiffValue::constant({5, 1}, normal_values(5, rng_));
      std::vector<DiffValue> wt;
      for (std::size_t h = 0; h < model.num_heads(); ++h) {
        wt.push_back(DiffValue::constant({5, 1}, normal_values(5, rng_)));
      }
      check(c.name, s, [&](const ParameterStore& p) {
        DiffValue total = ad::sum(model.joint_value(p, p[q], p[st]) * wj);
        const auto heads = model.transformed_values(p, p[q], p[st]);
        for (std::size_t h = 0; h < heads.size(); ++h) total = total + ad::sum(heads[h] * wt[h]);
        return total;
      });
    }
  }

  data::EpisodeBatch synthetic_batch(const nets::ModelDims& dims, std::size_t episodes) {
    std::vector<data::Episode> eps;
    std::uniform_int_distribution<std::size_t> len(1, 3);
    std::uniform_int_distribution<int> act(0, static_cast<int>(dims.num_actions) - 1);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t e = 0; e < episodes; ++e) {
      data::Episode ep;
      ep.num_agents = dims.num_agents;
      ep.num_actions = dims.num_actions;
      ep.obs_dim = dims.obs_dim;
      ep.state_dim = dims.state_dim;
      ep.length = len(rng_);
      ep.obs = normal_values((ep.length + 1) * dims.num_agents * dims.obs_dim, rng_);
      ep.state = normal_values((ep.length + 1) * dims.state_dim, rng_);
      ep.avail.assign((ep.length + 1) * dims.num_agents * dims.num_actions, 1);
      for (std::size_t k = 0; k < ep.length * dims.num_agents; ++k) ep.actions.push_back(act(rng_));
      ep.rewards = normal_values(ep.length, rng_);
      ep.terminal.assign(ep.length, 0);
      ep.terminal.back() = coin(rng_) ? 1 : 0;
      eps.push_back(std::move(ep));
    }
    std::vector<const data::Episode*> ptrs;
    for (const auto& e : eps) ptrs.push_back(&e);
    return data::EpisodeBatch::from_episodes(ptrs);
  }

  void losses() {
    const nets::ModelDims dims{2, 2, 3, 3};
    struct Case {
      std::string name;
      algo::Family family;
      algo::Ablation ablation;
    };
    const std::vector<Case> cases = {
        {"td loss (vdn)", algo::Family::Vdn, algo::Ablation::None},
        {"td loss (qmix)", algo::Family::Qmix, algo::Ablation::None},
        {"qtran++ combined loss", algo::Family::QtranPlusPlus, algo::Ablation::None},
        {"qtran++ fix combined loss", algo::Family::QtranPlusPlus, algo::Ablation::Fix},
        {"qtran original losses", algo::Family::Qtran, algo::Ablation::None},
    };
    const data::EpisodeBatch base_batch = synthetic_batch(dims, 4);
    for (const auto& c : cases) {
      algo::AlgorithmSpec spec;
      spec.family = c.family;
      spec.ablation = c.ablation;
      spec.gamma = 0.9;
      nets::FactoredValueModel model(dims, small_config(), spec.architecture(), rng_());
      // Scale parameters up so the estimators disagree and every loss term is active.
      for (std::size_t i = 0; i < model.params().size(); ++i) {
        for (double& v : model.params()[ad::ParamId{i}].mutable_data()) v *= 2.0;
      }
      ParameterStore target = model.params().clone();
      for (std::size_t i = 0; i < target.size(); ++i) {
        for (double& v : target[ad::ParamId{i}].mutable_data()) v += 0.1;
      }
      // Greedy rows sit on the case boundary of the non-optimal loss, where
      // only one-sided derivatives exist. Moving agent 0 off its greedy
      // action keeps every row strictly inside one branch.
      data::EpisodeBatch batch = base_batch;
      {
        ad::NoGradGuard no_grad;
        const auto est = algo::estimate_batch(model, model.params(), target, batch, spec.gamma);
        const std::size_t N = dims.num_agents;
        for (std::size_t r = 0; r < est.rows; ++r) {
          batch.actions[r * N] = static_cast<int>((est.greedy[r * N] + 1) % dims.num_actions);
        }
      }
      check(c.name, model.params(), [&](const ParameterStore& p) {
        return algo::combined_loss(model, p, target, batch, spec).total_node;
      });
      if (c.family == algo::Family::QtranPlusPlus && c.ablation == algo::Ablation::None) {
        check("qtran++ l_opt", model.params(), [&](const ParameterStore& p) {
          const auto est = algo::estimate_batch(model, p, target, batch, spec.gamma);
          const auto w = algo::head_weights(est.rows, est.q_tran_u.size(), spec.head_mode, nullptr);
          return algo::loss_opt(est, spec, w);
        });
        check("qtran++ l_nopt", model.params(), [&](const ParameterStore& p) {
          const auto est = algo::estimate_batch(model, p, target, batch, spec.gamma);
          const auto w = algo::head_weights(est.rows, est.q_tran_u.size(), spec.head_mode, nullptr);
          return algo::loss_nopt(est, spec, w);
        });
      }
    }
  }

  Rng rng_;
  double tolerance_;
  SuiteReport report_;
};

// Monotonicity probes -------------------------------------------------------

struct ProbeResult {
  double min_directional = std::numeric_limits<double>::infinity();
  double min_analytic = std::numeric_limits<double>::infinity();
};

ProbeResult probe(const std::function<std::vector<DiffValue>(const DiffValue&, const DiffValue&)>& f,
                  std::size_t agents, std::size_t state_dim, std::size_t pairs, Rng& rng) {
  constexpr double kEps = 1e-4;
  ProbeResult out;
  const auto states = DiffValue::constant({pairs, state_dim}, normal_values(pairs * state_dim, rng));
  const auto q = DiffValue::parameter({pairs, agents}, normal_values(pairs * agents, rng, 2.0));
  const auto base = f(q, states);
  for (std::size_t i = 0; i < agents; ++i) {
    std::vector<double> shifted(q.data().begin(), q.data().end());
    for (std::size_t r = 0; r < pairs; ++r) shifted[r * agents + i] += kEps;
    ad::NoGradGuard no_grad;
    const auto moved = f(DiffValue::constant({pairs, agents}, std::move(shifted)), states);
    for (std::size_t h = 0; h < base.size(); ++h) {
      for (std::size_t r = 0; r < pairs; ++r) {
        const double d = (moved[h].data()[r] - base[h].data()[r]) / kEps;
        out.min_directional = std::min(out.min_directional, d);
      }
    }
  }
  for (const auto& head : base) {
    DiffValue(q).zero_grad();
    ad::sum(head).backward();
    for (double g : q.grad()) out.min_analytic = std::min(out.min_analytic, g);
  }
  return out;
}

// Decentralization-condition oracles ------------------------------------------

struct Instance {
  std::size_t agents = 0;
  std::size_t actions = 0;
  std::vector<std::vector<double>> q;
  std::vector<int> u_bar;
};

Instance random_utilities(Rng& rng) {
  std::uniform_int_distribution<std::size_t> agents(2, 3);
  std::uniform_int_distribution<std::size_t> actions(2, 4);
  Instance inst;
  inst.agents = agents(rng);
  inst.actions = actions(rng);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < inst.agents; ++i) {
    std::vector<double> qi(inst.actions);
    for (auto& v : qi) v = n(rng);
    inst.u_bar.push_back(static_cast<int>(std::max_element(qi.begin(), qi.end()) - qi.begin()));
    inst.q.push_back(std::move(qi));
  }
  return inst;
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.passed; });
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json j;
  j["suite"] = suite;
  j["passed"] = passed();
  j["seconds"] = seconds;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"details", c.details}});
  }
  return j;
}

SuiteReport run_grad_suite(std::uint64_t seed, double tolerance) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport r = GradSuite(seed, tolerance).run();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

SuiteReport run_mono_suite(std::uint64_t seed, std::size_t pairs, double tolerance) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport report;
  report.suite = "mono";
  Rng rng(seed);
  const nets::ModelDims dims{3, 4, 5, 4};
  struct Case {
    std::string name;
    algo::AlgorithmSpec spec;
    bool heterogeneous;
  };
  std::vector<Case> cases;
  {
    algo::AlgorithmSpec s;
    s.family = algo::Family::Qmix;
    cases.push_back({"qmix mixer", s, false});
    s.family = algo::Family::QtranPlusPlus;
    cases.push_back({"qtran++ heads", s, false});
    cases.push_back({"qtran++ heads (heterogeneous)", s, true});
    s.ablation = algo::Ablation::Mix;
    cases.push_back({"mix ablation head", s, false});
  }
  for (const auto& c : cases) {
    ProbeResult worst;
    // Several initializations with enlarged weights to exercise the nonlinearity.
    for (int init = 0; init < 4; ++init) {
      nets::NetworkConfig net;
      net.heterogeneous = c.heterogeneous;
      nets::FactoredValueModel model(dims, net, c.spec.architecture(), rng());
      for (std::size_t i = 0; i < model.params().size(); ++i) {
        for (double& v : model.params()[ad::ParamId{i}].mutable_data()) v *= 1.0 + init;
      }
      const std::size_t share = pairs / 4 + (init < static_cast<int>(pairs % 4) ? 1 : 0);
      const auto f = [&](const DiffValue& q, const DiffValue& s) -> std::vector<DiffValue> {
        if (c.spec.family == algo::Family::Qmix) return {model.joint_value(model.params(), q, s)};
        return model.transformed_values(model.params(), q, s);
      };
      const ProbeResult r = probe(f, dims.num_agents, dims.state_dim, share, rng);
      worst.min_directional = std::min(worst.min_directional, r.min_directional);
      worst.min_analytic = std::min(worst.min_analytic, r.min_analytic);
    }
    CheckOutcome out;
    out.name = c.name;
    out.passed = worst.min_directional >= -tolerance && worst.min_analytic >= -tolerance;
    out.details = {{"pairs", pairs},
                   {"min_directional_derivative", worst.min_directional},
                   {"min_analytic_derivative", worst.min_analytic},
                   {"tolerance", -tolerance}};
    report.checks.push_back(std::move(out));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

SuiteReport run_theorem1_suite(std::uint64_t seed, std::size_t instances) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport report;
  report.suite = "theorem1";
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Sufficiency: build tables that satisfy the conditions, then brute-force.
  {
    std::size_t satisfied = 0, argmax_match = 0;
    std::vector<std::size_t> failures;
    for (std::size_t k = 0; k < instances; ++k) {
      const Instance inst = random_utilities(rng);
      const std::size_t J = env::joint_action_count(inst.agents, inst.actions);
      std::vector<double> weights(inst.agents);
      for (auto& w : weights) w = 0.2 + unit(rng);
      const double offset = 4.0 * unit(rng) - 2.0;
      std::vector<double> q_tran(J), q_jt(J);
      const std::size_t bar = env::joint_index(inst.u_bar, inst.actions);
      for (std::size_t j = 0; j < J; ++j) {
        const auto u = env::joint_from_index(j, inst.agents, inst.actions);
        double lin = 0.0;
        for (std::size_t i = 0; i < inst.agents; ++i) lin += weights[i] * inst.q[i][u[i]];
        // A monotone nonlinearity keeps Q_tran monotone while bending the table.
        q_tran[j] = offset + lin + 0.5 * std::tanh(lin);
        q_jt[j] = j == bar ? q_tran[j] : q_tran[j] - 3.0 * unit(rng);
      }
      const auto cond = algo::check_decentralization_conditions(inst.q, q_jt, q_tran, inst.u_bar);
      if (!cond.satisfied()) {
        failures.push_back(k);
        continue;
      }
      ++satisfied;
      const auto best = algo::argmax_set(q_jt);
      if (best.size() == 1 && best[0] == bar) {
        ++argmax_match;
      } else {
        failures.push_back(k);
      }
    }
    CheckOutcome out;
    out.name = "sufficiency";
    out.passed = satisfied == instances && argmax_match == instances;
    out.details = {{"instances", instances},
                   {"satisfying_conditions", satisfied},
                   {"argmax_matches", argmax_match},
                   {"failed_instances", failures}};
    report.checks.push_back(std::move(out));
  }

  // Necessity: for decentralizable tables an alpha-scaled transformed table
  // passes the chain check.
  {
    std::size_t passed = 0;
    double largest_halvings = 0;
    std::vector<std::size_t> failures;
    for (std::size_t k = 0; k < instances; ++k) {
      const Instance inst = random_utilities(rng);
      const std::size_t J = env::joint_action_count(inst.agents, inst.actions);
      const std::size_t bar = env::joint_index(inst.u_bar, inst.actions);
      std::vector<double> q_jt(J);
      for (auto& v : q_jt) v = 4.0 * unit(rng) - 2.0;
      q_jt[bar] = *std::max_element(q_jt.begin(), q_jt.end()) + 0.01 + unit(rng);

      bool ok = false;
      double alpha = 1.0;
      for (int halving = 0; halving < 60 && !ok; ++halving, alpha *= 0.5) {
        std::vector<double> q_tran(J);
        for (std::size_t j = 0; j < J; ++j) {
          const auto u = env::joint_from_index(j, inst.agents, inst.actions);
          double adv = 0.0;
          for (std::size_t i = 0; i < inst.agents; ++i) {
            adv += alpha * (inst.q[i][u[i]] - inst.q[i][inst.u_bar[i]]);
          }
          q_tran[j] = adv + q_jt[bar];
        }
        const auto cond = algo::check_decentralization_conditions(inst.q, q_jt, q_tran, inst.u_bar);
        const auto chain = algo::chain_violations(q_jt, {q_tran}, bar);
        if (cond.satisfied() && chain.all_zero()) {
          ok = true;
          largest_halvings = std::max(largest_halvings, static_cast<double>(halving));
        }
      }
      if (ok) {
        ++passed;
      } else {
        failures.push_back(k);
      }
    }
    CheckOutcome out;
    out.name = "necessity (alpha construction)";
    out.passed = passed == instances;
    out.details = {{"instances", instances},
                   {"passed", passed},
                   {"max_alpha_halvings", largest_halvings},
                   {"failed_instances", failures}};
    report.checks.push_back(std::move(out));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<SuiteReport> run_suites(const std::string& name, std::uint64_t seed) {
  if (name == "grad") return {run_grad_suite(seed)};
  if (name == "mono") return {run_mono_suite(seed)};
  if (name == "theorem1") return {run_theorem1_suite(seed)};
  if (name == "all") return {run_grad_suite(seed), run_mono_suite(seed), run_theorem1_suite(seed)};
  throw std::invalid_argument("unknown suite '" + name + "' (expected grad, mono, theorem1 or all)");
}

}  // namespace vfactor::app
