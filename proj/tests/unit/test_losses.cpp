#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vfactor/algo/losses.hpp"
#include "vfactor/env/presets.hpp"
#include "vfactor/train/harness.hpp"

using namespace vfactor;
using ad::DiffValue;

namespace {

DiffValue col(std::vector<double> v, bool live = false) {
  const std::size_t n = v.size();
  return live ? DiffValue::parameter({n, 1}, std::move(v)) : DiffValue::constant({n, 1}, std::move(v));
}

algo::AlgorithmSpec make_spec(algo::Family f, algo::Ablation a = algo::Ablation::None) {
  algo::AlgorithmSpec s;
  s.family = f;
  s.ablation = a;
  s.validate();
  return s;
}

nets::NetworkConfig small_config() {
  nets::NetworkConfig c;
  c.embed_width = 8;
  c.gru_width = 8;
  c.mixer_width = 6;
  c.hyper_width = 8;
  c.feedforward_width = 8;
  c.value_width = 8;
  return c;
}

struct Fixture {
  env::EnvSpec env_spec;
  std::unique_ptr<env::Environment> env;
  nets::FactoredValueModel model;
  ad::ParameterStore target;
  std::vector<data::Episode> episodes;
  data::EpisodeBatch batch;

  Fixture(const algo::AlgorithmSpec& spec, env::EnvSpec es, std::uint64_t seed, std::size_t count = 6)
      : env_spec(std::move(es)),
        env(env::make_environment(env_spec)),
        model(train::dims_of(*env), small_config(), spec.architecture(), seed) {
    target = model.params().clone();
    std::mt19937_64 env_rng(seed + 100), explore_rng(seed + 200);
    for (std::size_t i = 0; i < count; ++i) {
      episodes.push_back(train::collect_episode(*env, model, model.params(), 1.0, env_rng, explore_rng));
    }
    std::vector<const data::Episode*> ptrs;
    for (const auto& e : episodes) ptrs.push_back(&e);
    batch = data::EpisodeBatch::from_episodes(ptrs);
  }
};

env::GridGameSpec short_grid() {
  env::GridGameSpec g;
  g.width = 3;
  g.height = 3;
  g.num_targets = 1;
  g.episode_limit = 4;
  g.sight_radius = 1;
  return g;
}

// One-row estimates for hand-evaluated loss examples.
algo::BatchEstimates one_row(double jt_u, double jt_ubar, std::vector<double> tran_u,
                             std::vector<double> tran_ubar, double target) {
  algo::BatchEstimates est;
  est.rows = 1;
  est.filled = col({1.0});
  est.valid = 1.0;
  est.q_jt_u = col({jt_u}, true);
  est.q_jt_ubar = col({jt_ubar}, true);
  for (double v : tran_u) est.q_tran_u.push_back(col({v}, true));
  for (double v : tran_ubar) est.q_tran_ubar.push_back(col({v}, true));
  est.td_target = col({target});
  est.is_greedy = {0};
  return est;
}

}  // namespace

TEST(LossTd, ExactFitOnTerminalStepIsZero) {
  EXPECT_DOUBLE_EQ(algo::loss_td(one_row(4.0, 0.0, {}, {}, 4.0)).item(), 0.0);
}

TEST(LossTd, MissByTwoCostsFour) {
  EXPECT_DOUBLE_EQ(algo::loss_td(one_row(2.0, 0.0, {}, {}, 4.0)).item(), 4.0);
}

TEST(LossTd, PaddingRowsAreIgnored) {
  auto est = one_row(2.0, 0.0, {}, {}, 4.0);
  est.rows = 2;
  est.filled = col({1.0, 0.0});
  est.q_jt_u = col({2.0, 100.0});
  est.td_target = col({4.0, 0.0});
  EXPECT_DOUBLE_EQ(algo::loss_td(est).item(), 4.0);
}

// With gamma = 0, L_td is plain regression of Q_jt(s, u) on the reward. The
// oracle reruns the recurrent utilities episode by episode.
TEST(LossTd, ZeroDiscountIsRewardRegression) {
  for (auto family : {algo::Family::Vdn, algo::Family::Qmix, algo::Family::QtranPlusPlus}) {
    const auto spec = make_spec(family);
    Fixture fx(spec, short_grid(), 31);
    const auto est = algo::estimate_batch(fx.model, fx.model.params(), fx.target, fx.batch, 0.0);
    const double got = algo::loss_td(est).item();

    const auto& net = fx.model.utility();
    const std::size_t n = fx.model.dims().num_agents;
    double sum = 0.0, count = 0.0;
    for (const auto& ep : fx.episodes) {
      auto h = net.initial_state(n);
      for (std::size_t t = 0; t < ep.length; ++t) {
        const std::vector<double> obs(ep.obs.begin() + t * n * ep.obs_dim,
                                      ep.obs.begin() + (t + 1) * n * ep.obs_dim);
        auto [q, next] = net.step(fx.model.params(), DiffValue::constant({n, ep.obs_dim}, obs), h);
        h = next;
        std::vector<std::vector<double>> qv(n);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t a = 0; a < q.cols(); ++a) qv[i].push_back(q.at(i, a));
        }
        const std::vector<double> state(ep.state.begin() + t * ep.state_dim,
                                        ep.state.begin() + (t + 1) * ep.state_dim);
        const std::vector<int> u(ep.actions.begin() + t * n, ep.actions.begin() + (t + 1) * n);
        const double q_jt = nets::eval_joint(fx.model, fx.model.params(), state, qv, u).q_jt;
        sum += (q_jt - ep.rewards[t]) * (q_jt - ep.rewards[t]);
        count += 1.0;
      }
    }
    EXPECT_NEAR(got, sum / count, 1e-10) << algo::to_string(family);
  }
}

TEST(LossOpt, MatchingHeadsCostNothing) {
  const auto est = one_row(0.0, 3.0, {0.0}, {3.0}, 0.0);
  const auto spec = make_spec(algo::Family::QtranPlusPlus);
  EXPECT_DOUBLE_EQ(algo::loss_opt(est, spec, algo::head_weights(1, 1, spec.head_mode, nullptr)).item(), 0.0);
}

TEST(LossOpt, TwoHeadsAveraged) {
  const auto est = one_row(0.0, 3.0, {0.0, 0.0}, {2.0, 4.0}, 0.0);
  const auto spec = make_spec(algo::Family::QtranPlusPlus);
  const auto w = algo::head_weights(1, 2, algo::HeadMode::Average, nullptr);
  EXPECT_DOUBLE_EQ(algo::loss_opt(est, spec, w).item(), 1.0);
}

TEST(LossOpt, FixAblationGivesJointParametersNoGradient) {
  const auto spec = make_spec(algo::Family::QtranPlusPlus, algo::Ablation::Fix);
  Fixture fx(spec, env::nondecentralizable_2x2(), 32);
  const auto est = algo::estimate_batch(fx.model, fx.model.params(), fx.target, fx.batch, spec.gamma);
  const auto w = algo::head_weights(est.rows, est.q_tran_u.size(), spec.head_mode, nullptr);
  (algo::loss_opt(est, spec, w) + algo::loss_nopt(est, spec, w)).backward();
  for (auto id : fx.model.joint_parameters()) {
    for (double g : fx.model.params()[id].grad()) EXPECT_EQ(g, 0.0) << fx.model.params().name(id);
  }
}

TEST(LossOpt, DefaultVariantTrainsTheJointEstimator) {
  const auto spec = make_spec(algo::Family::QtranPlusPlus);
  Fixture fx(spec, env::nondecentralizable_2x2(), 33);
  const auto est = algo::estimate_batch(fx.model, fx.model.params(), fx.target, fx.batch, spec.gamma);
  const auto w = algo::head_weights(est.rows, est.q_tran_u.size(), spec.head_mode, nullptr);
  algo::loss_opt(est, spec, w).backward();
  double norm = 0.0;
  for (auto id : fx.model.joint_parameters()) {
    for (double g : fx.model.params()[id].grad()) norm += g * g;
  }
  EXPECT_GT(norm, 0.0);
}

TEST(LossNopt, InsideBandCostsNothing) {
  EXPECT_DOUBLE_EQ(algo::nopt_terms(col({2.0}), col({3.0}), col({2.5}), false).item(), 0.0);
}

TEST(LossNopt, AboveBandPullsTranDownOnly) {
  auto jt_u = col({2.0}, true), jt_bar = col({3.0}, true), tran = col({5.0}, true);
  const auto term = algo::nopt_terms(jt_u, jt_bar, tran, false);
  EXPECT_DOUBLE_EQ(term.item(), 4.0);
  term.backward();
  EXPECT_DOUBLE_EQ(tran.grad()[0], 4.0);  // descent lowers Q_tran
  EXPECT_DOUBLE_EQ(jt_bar.grad()[0], 0.0);
  EXPECT_DOUBLE_EQ(jt_u.grad()[0], 0.0);
}

TEST(LossNopt, BelowBandPullsTranUpAndJointDown) {
  auto jt_u = col({2.0}, true), jt_bar = col({3.0}, true), tran = col({1.0}, true);
  const auto term = algo::nopt_terms(jt_u, jt_bar, tran, false);
  EXPECT_DOUBLE_EQ(term.item(), 1.0);
  term.backward();
  EXPECT_DOUBLE_EQ(tran.grad()[0], -2.0);
  EXPECT_DOUBLE_EQ(jt_u.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(jt_bar.grad()[0], 0.0);
}

TEST(LossNopt, BelowBandWithFixLeavesJointAlone) {
  auto jt_u = col({2.0}, true), jt_bar = col({3.0}, true), tran = col({1.0}, true);
  const auto term = algo::nopt_terms(jt_u, jt_bar, tran, true);
  EXPECT_DOUBLE_EQ(term.item(), 1.0);
  term.backward();
  EXPECT_DOUBLE_EQ(tran.grad()[0], -2.0);
  EXPECT_DOUBLE_EQ(jt_u.grad()[0], 0.0);
}

TEST(LossNopt, BetterThanGreedyBranchTrainsBothSides) {
  auto jt_u = col({3.5}, true), jt_bar = col({3.0}, true), tran = col({3.0}, true);
  const auto term = algo::nopt_terms(jt_u, jt_bar, tran, false);
  EXPECT_DOUBLE_EQ(term.item(), 0.25);
  term.backward();
  EXPECT_DOUBLE_EQ(jt_u.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(tran.grad()[0], -1.0);
  EXPECT_DOUBLE_EQ(jt_bar.grad()[0], 0.0);
}

TEST(LossNopt, RowsTakeTheirOwnBranch) {
  const auto terms = algo::nopt_terms(col({2.0, 2.0, 2.0, 4.0}), col({3.0, 3.0, 3.0, 3.0}),
                                      col({2.5, 5.0, 1.0, 4.0}), false);
  EXPECT_EQ(std::vector<double>(terms.data().begin(), terms.data().end()),
            (std::vector<double>{0.0, 4.0, 1.0, 0.0}));
}

TEST(LossOriginal, MaxPicksTranWhenItIsLarger) {
  EXPECT_DOUBLE_EQ(algo::original_nopt_terms(col({2.0}), col({3.0})).item(), 0.0);
}

TEST(LossOriginal, UnderestimateIsPulledUpOnly) {
  auto jt = col({3.0}, true), tran = col({2.0}, true);
  const auto term = algo::original_nopt_terms(jt, tran);
  EXPECT_DOUBLE_EQ(term.item(), 1.0);
  term.backward();
  EXPECT_DOUBLE_EQ(tran.grad()[0], -2.0);
  EXPECT_DOUBLE_EQ(jt.grad()[0], 0.0);
}

TEST(LossOriginal, OptTermDoesNotReachJoint) {
  auto jt = col({3.0}, true), tran = col({1.0}, true);
  const auto term = algo::original_opt_terms(jt, tran);
  EXPECT_DOUBLE_EQ(term.item(), 4.0);
  term.backward();
  EXPECT_DOUBLE_EQ(jt.grad()[0], 0.0);
  EXPECT_DOUBLE_EQ(tran.grad()[0], -4.0);
}

TEST(LossOriginal, QtranFamilyGivesJointParametersNoGradient) {
  const auto spec = make_spec(algo::Family::Qtran);
  Fixture fx(spec, env::nondecentralizable_2x2(), 34);
  const auto est = algo::estimate_batch(fx.model, fx.model.params(), fx.target, fx.batch, spec.gamma);
  const auto w = algo::head_weights(est.rows, est.q_tran_u.size(), spec.head_mode, nullptr);
  const auto orig = algo::loss_qtran_original(est, w);
  (orig.l_opt + orig.l_nopt).backward();
  for (auto id : fx.model.joint_parameters()) {
    for (double g : fx.model.params()[id].grad()) EXPECT_EQ(g, 0.0);
  }
}

TEST(CombinedLoss, WeightedSumOfHandComponents) {
  // l_td = 0.5, l_opt = 0.2, l_nopt = 0.3 (Q_jt(u) >= Q_jt(ū) branch)
  const auto est = one_row(1.0, 0.0, {1.0 - std::sqrt(0.3)}, {std::sqrt(0.2)}, 1.0 - std::sqrt(0.5));
  const auto out = algo::combined_loss(est, make_spec(algo::Family::QtranPlusPlus));
  EXPECT_NEAR(out.l_td, 0.5, 1e-12);
  EXPECT_NEAR(out.l_opt, 0.2, 1e-12);
  EXPECT_NEAR(out.l_nopt, 0.3, 1e-12);
  EXPECT_NEAR(out.total, 1.2, 1e-9);
}

TEST(CombinedLoss, TotalMatchesComponentsOnRealBatches) {
  for (auto ab : {algo::Ablation::None, algo::Ablation::Mix, algo::Ablation::Fc, algo::Ablation::Lb,
                  algo::Ablation::Fix}) {
    auto spec = make_spec(algo::Family::QtranPlusPlus, ab);
    spec.lambda_opt = 2.0;
    spec.lambda_nopt = 1.0;
    Fixture fx(spec, short_grid(), 35);
    const auto out = algo::combined_loss(fx.model, fx.model.params(), fx.target, fx.batch, spec);
    EXPECT_NEAR(out.total, out.l_td + 2.0 * out.l_opt + out.l_nopt, 1e-9) << algo::to_string(ab);
  }
}

TEST(CombinedLoss, VdnReportsNoTransformedLosses) {
  const auto spec = make_spec(algo::Family::Vdn);
  Fixture fx(spec, env::nondecentralizable_2x2(), 36);
  const auto out = algo::combined_loss(fx.model, fx.model.params(), fx.target, fx.batch, spec);
  EXPECT_EQ(out.l_opt, 0.0);
  EXPECT_EQ(out.l_nopt, 0.0);
  EXPECT_EQ(out.total, out.l_td);
}

TEST(CombinedLoss, LbAblationSharesTheTdTerm) {
  const auto full = make_spec(algo::Family::QtranPlusPlus);
  const auto lb = make_spec(algo::Family::QtranPlusPlus, algo::Ablation::Lb);
  Fixture fx(full, short_grid(), 37);
  const auto a = algo::combined_loss(fx.model, fx.model.params(), fx.target, fx.batch, full);
  const auto b = algo::combined_loss(fx.model, fx.model.params(), fx.target, fx.batch, lb);
  EXPECT_EQ(a.l_td, b.l_td);
}

TEST(CombinedLoss, InconsistentSpecsAreRejected) {
  algo::AlgorithmSpec s;
  s.family = algo::Family::Vdn;
  s.ablation = algo::Ablation::Mix;
  EXPECT_THROW(s.validate(), algo::SpecError);
  EXPECT_THROW(algo::combined_loss(one_row(0, 0, {}, {}, 0), s), algo::SpecError);
  algo::AlgorithmSpec g;
  g.gamma = 1.0;
  EXPECT_THROW(g.validate(), algo::SpecError);
  algo::AlgorithmSpec l;
  l.lambda_opt = 0.0;
  EXPECT_THROW(l.validate(), algo::SpecError);
  for (auto [family, ablation] : {std::pair{algo::Family::Qmix, algo::Ablation::None},
                                  std::pair{algo::Family::Qtran, algo::Ablation::None},
                                  std::pair{algo::Family::QtranPlusPlus, algo::Ablation::Mix}}) {
    algo::AlgorithmSpec o;
    o.family = family;
    o.ablation = ablation;
    o.own_head_utilities = true;
    EXPECT_THROW(o.validate(), algo::SpecError);
  }
  algo::AlgorithmSpec fc;
  fc.ablation = algo::Ablation::Fc;
  fc.own_head_utilities = true;
  EXPECT_NO_THROW(fc.validate());
}

TEST(HeadWeights, AverageAndRandomRowsSumToOne) {
  const auto avg = algo::head_weights(3, 4, algo::HeadMode::Average, nullptr);
  for (double v : avg.data()) EXPECT_DOUBLE_EQ(v, 0.25);
  std::mt19937_64 rng(0);
  const auto rnd = algo::head_weights(50, 3, algo::HeadMode::RandomHead, &rng);
  for (std::size_t r = 0; r < 50; ++r) {
    double s = 0.0;
    for (std::size_t h = 0; h < 3; ++h) {
      const double v = rnd.at(r, h);
      EXPECT_TRUE(v == 0.0 || v == 1.0);
      s += v;
    }
    EXPECT_EQ(s, 1.0);
  }
}

// Entries with a nonzero L_nopt gradient w.r.t. Q_tran(u) under the clipped
// loss include every such entry of the max-target loss, and in the
// configuration Q_tran(u) > Q_jt(ū) > Q_jt(u) only the clipped loss is active.
TEST(LossNoptProperty, ClippedLossSignalIsASuperset) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> d;
  std::size_t strictly_denser = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 16;
    std::vector<double> ju(n), jb(n), tu(n);
    for (std::size_t r = 0; r < n; ++r) {
      ju[r] = d(rng);
      jb[r] = d(rng);
      tu[r] = d(rng);
    }
    auto tran_a = col(tu, true), tran_b = col(tu, true);
    ad::sum(algo::nopt_terms(col(ju), col(jb), tran_a, false)).backward();
    ad::sum(algo::original_nopt_terms(col(ju), tran_b)).backward();
    for (std::size_t r = 0; r < n; ++r) {
      const bool ours = tran_a.grad()[r] != 0.0;
      const bool theirs = tran_b.grad()[r] != 0.0;
      if (theirs) {
        EXPECT_TRUE(ours);
      }
      if (tu[r] > jb[r] && jb[r] > ju[r]) {
        EXPECT_TRUE(ours);
        EXPECT_FALSE(theirs);
        ++strictly_denser;
      }
    }
  }
  EXPECT_GT(strictly_denser, 0u);
}

TEST(EstimateBatch, DetachedJointInputsKeepValuesAndTd) {
  auto spec = make_spec(algo::Family::QtranPlusPlus);
  Fixture fx(spec, env::nondecentralizable_2x2(), 38);
  const auto live = algo::estimate_batch(fx.model, fx.model.params(), fx.target, fx.batch, spec.gamma);
  const auto cut = algo::estimate_batch(fx.model, fx.model.params(), fx.target, fx.batch, spec.gamma, true);
  ASSERT_TRUE(cut.imitation_jt_u.defined());
  for (std::size_t r = 0; r < live.rows; ++r) {
    EXPECT_EQ(cut.imitation_jt_u.data()[r], live.q_jt_u.data()[r]);
    EXPECT_EQ(cut.imitation_jt_ubar.data()[r], live.q_jt_ubar.data()[r]);
  }
  EXPECT_EQ(algo::loss_td(cut).item(), algo::loss_td(live).item());
}

TEST(EstimateBatch, OwnHeadRoutingKeepsEveryLossValue) {
  auto spec = make_spec(algo::Family::QtranPlusPlus);
  Fixture fx(spec, env::nondecentralizable_2x2(), 39);
  auto own = spec;
  own.own_head_utilities = true;
  const auto a = algo::combined_loss(fx.model, fx.model.params(), fx.target, fx.batch, spec);
  const auto b = algo::combined_loss(fx.model, fx.model.params(), fx.target, fx.batch, own);
  EXPECT_EQ(a.l_td, b.l_td);
  EXPECT_EQ(a.l_opt, b.l_opt);
  EXPECT_EQ(a.l_nopt, b.l_nopt);
}

TEST(EstimateBatch, GreedyFlagsMatchStoredActions) {
  const auto spec = make_spec(algo::Family::QtranPlusPlus);
  Fixture fx(spec, env::nondecentralizable_2x2(), 39, 16);
  const auto est = algo::estimate_batch(fx.model, fx.model.params(), fx.target, fx.batch, spec.gamma);
  const std::size_t n = fx.batch.num_agents;
  const auto stored = fx.batch.actions_at(0);
  for (std::size_t b = 0; b < fx.batch.batch_size; ++b) {
    bool same = true;
    for (std::size_t i = 0; i < n; ++i) same &= static_cast<std::size_t>(stored[b * n + i]) == est.greedy[b * n + i];
    EXPECT_EQ(static_cast<bool>(est.is_greedy[b]), same);
  }
}
