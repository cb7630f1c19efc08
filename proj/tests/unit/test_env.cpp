#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "vfactor/env/presets.hpp"

using namespace vfactor::env;

namespace {

std::size_t active_state(const EnvStep& s) {
  for (std::size_t k = 0; k < s.state.size(); ++k) {
    if (s.state[k] == 1.0) return k;
  }
  return s.state.size();
}

// Steps the game until it lands in latent state `k`.
EnvStep reset_into(MatrixGame& game, std::size_t k, Rng& rng) {
  for (;;) {
    EnvStep s = game.reset(rng);
    if (game.current_state() == k) return s;
    game.step(std::vector<int>(game.num_agents(), 0), rng);
  }
}

}  // namespace

TEST(MatrixGame, LatentStatesAreEquallyLikely) {
  MatrixGame game(nondecentralizable_2x2());
  Rng rng(12345);
  int first = 0;
  const int n = 10000;
  const std::vector<int> aa{0, 0};
  for (int i = 0; i < n; ++i) {
    const auto s = game.reset(rng);
    first += active_state(s) == 0;
    game.step(aa, rng);
  }
  const double freq = static_cast<double>(first) / n;
  EXPECT_GE(freq, 0.48);
  EXPECT_LE(freq, 0.52);
}

TEST(MatrixGame, PayoffsOfThePresetStates) {
  MatrixGame game(nondecentralizable_2x2());
  Rng rng(1);
  reset_into(game, 0, rng);
  auto s = game.step(std::vector<int>{0, 0}, rng);
  EXPECT_EQ(s.reward, 4.0);
  EXPECT_TRUE(s.terminated);
  reset_into(game, 1, rng);
  s = game.step(std::vector<int>{1, 1}, rng);
  EXPECT_EQ(s.reward, 2.0);
  EXPECT_TRUE(s.terminated);
}

TEST(MatrixGame, ExpectedReturnsOfThePreset) {
  const auto spec = nondecentralizable_2x2();
  EXPECT_DOUBLE_EQ(expected_return_of_joint_action(spec, std::vector<int>{0, 0}), 2.0);
  EXPECT_DOUBLE_EQ(expected_return_of_joint_action(spec, std::vector<int>{1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(expected_return_of_joint_action(spec, std::vector<int>{0, 1}), 1.5);
}

TEST(MatrixGame, HiddenStateGivesConstantObservations) {
  MatrixGame game(nondecentralizable_2x2());
  Rng rng(2);
  const auto a = game.observe_state(0);
  const auto b = game.observe_state(1);
  EXPECT_EQ(a.observations, b.observations);
  EXPECT_NE(a.observations[0], a.observations[1]);  // agent ids differ
  EXPECT_NE(a.state, b.state);
}

TEST(MatrixGame, SingleStateGameAlwaysReportsThatState) {
  MatrixGameSpec spec;
  spec.states = {{1.0, {1, 2, 3, 4}}};
  MatrixGame game(spec);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(game.reset(rng).state, std::vector<double>{1.0});
    game.step(std::vector<int>{1, 0}, rng);
  }
}

TEST(MatrixGame, OutOfRangeActionAndWrongArityAreErrors) {
  MatrixGame game(nondecentralizable_2x2());
  Rng rng(4);
  game.reset(rng);
  EXPECT_THROW(game.step(std::vector<int>{0, 2}, rng), EnvError);
  EXPECT_THROW(game.step(std::vector<int>{-1, 0}, rng), EnvError);
  EXPECT_THROW(game.step(std::vector<int>{0}, rng), EnvError);
}

TEST(MatrixGame, InvalidSpecsAreRejected) {
  MatrixGameSpec bad;
  bad.states = {{0.7, {0, 0, 0, 0}}, {0.7, {0, 0, 0, 0}}};
  EXPECT_THROW(MatrixGame{bad}, EnvError);
  bad.states = {{1.0, {0, 0, 0}}};
  EXPECT_THROW(MatrixGame{bad}, EnvError);
  bad.states.clear();
  EXPECT_THROW(MatrixGame{bad}, EnvError);
}

TEST(MatrixGame, JointIndexRoundTrips) {
  for (std::size_t i = 0; i < 27; ++i) {
    const auto u = joint_from_index(i, 3, 3);
    EXPECT_EQ(joint_index(u, 3), i);
  }
  EXPECT_EQ(joint_label(std::vector<int>{0, 1}), "AB");
  EXPECT_EQ(joint_action_count(2, 3), 9u);
}

TEST(MatrixGameProperty, ExpectedReturnMatchesEmpiricalMean) {
  Rng spec_rng(77);
  const auto spec = random_matrix_game(2, 3, 3, false, spec_rng);
  MatrixGame game(spec);
  Rng rng(78);
  const std::vector<int> u{2, 1};
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    game.reset(rng);
    const double r = game.step(u, rng).reward;
    sum += r;
    sum_sq += r * r;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - expected_return_of_joint_action(spec, u)), 3.0 * se);
}

TEST(MatrixGameProperty, SeededTraceIsReproducible) {
  auto trace = [] {
    MatrixGame game(nondecentralizable_2x2());
    Rng rng(99);
    std::vector<double> out;
    for (int i = 0; i < 200; ++i) {
      const auto s = game.reset(rng);
      out.insert(out.end(), s.state.begin(), s.state.end());
      out.push_back(game.step(std::vector<int>{i % 2, (i / 2) % 2}, rng).reward);
    }
    return out;
  };
  EXPECT_EQ(trace(), trace());
}

TEST(GridGame, ResetPlacesEveryPieceOnADistinctCell) {
  GridGameSpec spec;
  spec.num_agents = 3;
  spec.num_targets = 4;
  GridGame game(spec);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    game.reset(rng);
    std::set<std::pair<int, int>> cells;
    for (const auto& c : game.agents()) cells.insert({c.x, c.y});
    for (const auto& c : game.targets()) cells.insert({c.x, c.y});
    EXPECT_EQ(cells.size(), 7u);
  }
}

TEST(GridGame, NoTargetsMeansNoReward) {
  GridGameSpec spec;
  spec.num_targets = 0;
  spec.damage_penalty = 0.5;
  GridGame game(spec);
  Rng rng(6);
  std::uniform_int_distribution<int> pick(0, 4);
  for (int ep = 0; ep < 20; ++ep) {
    game.reset(rng);
    double total = 0.0;
    std::size_t steps = 0;
    for (;;) {
      const auto s = game.step(std::vector<int>{pick(rng), pick(rng)}, rng);
      total += s.reward;
      ++steps;
      if (s.terminated) break;
    }
    EXPECT_EQ(total, 0.0);
    EXPECT_LE(steps, spec.episode_limit);
  }
}

TEST(GridGame, TwoAgentsMeetingOnATargetCaptureIt) {
  // 1x3 corridor: agents at the ends, target in the middle.
  GridGameSpec spec;
  spec.width = 3;
  spec.height = 1;
  spec.num_targets = 1;
  GridGame game(spec);
  Rng rng(7);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    game.reset(rng);
    if (game.targets()[0].x == 1) break;
  }
  ASSERT_EQ(game.targets()[0].x, 1);
  const int left = game.agents()[0].x == 0 ? 4 : 3;  // move toward the centre
  const int right = left == 4 ? 3 : 4;
  const auto s = game.step(std::vector<int>{left, right}, rng);
  EXPECT_EQ(s.reward, spec.capture_reward);
  EXPECT_TRUE(s.terminated);
  EXPECT_FALSE(s.truncated);
  EXPECT_FALSE(game.alive()[0]);
}

TEST(GridGame, EpisodeLimitTruncates) {
  GridGameSpec spec;
  spec.episode_limit = 3;
  GridGame game(spec);
  Rng rng(8);
  game.reset(rng);
  EnvStep s;
  for (int t = 0; t < 3; ++t) s = game.step(std::vector<int>{0, 0}, rng);
  EXPECT_TRUE(s.terminated);
  EXPECT_TRUE(s.truncated);
  EXPECT_THROW(game.step(std::vector<int>{0, 0}, rng), EnvError);
}

TEST(GridGame, ActionErrorsAndShapes) {
  GridGame game(GridGameSpec{});
  Rng rng(9);
  const auto s = game.reset(rng);
  EXPECT_EQ(s.observations.size(), 2u);
  EXPECT_EQ(s.observations[0].size(), game.obs_dim());
  EXPECT_EQ(s.state.size(), game.state_dim());
  EXPECT_THROW(game.step(std::vector<int>{5, 0}, rng), EnvError);
  EXPECT_THROW(game.step(std::vector<int>{0, 0, 0}, rng), EnvError);
}

TEST(GridGame, OvercrowdedSpecIsRejected) {
  GridGameSpec spec;
  spec.width = 2;
  spec.height = 2;
  spec.num_agents = 3;
  spec.num_targets = 2;
  EXPECT_THROW(GridGame{spec}, EnvError);
}

TEST(Presets, KnownNamesAndUnknownName) {
  for (const auto& name : preset_names()) EXPECT_NO_THROW(make_environment(preset(name)));
  EXPECT_THROW(preset("nondec-3x3"), EnvError);
}
