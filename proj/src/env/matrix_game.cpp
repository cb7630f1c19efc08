#include "vfactor/env/matrix_game.hpp"

#include <cmath>
#include <string>

namespace vfactor::env {

std::vector<double> one_hot(std::size_t index, std::size_t size) {
  std::vector<double> v(size, 0.0);
  v.at(index) = 1.0;
  return v;
}

std::size_t joint_action_count(std::size_t num_agents, std::size_t actions_per_agent) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < num_agents; ++i) n *= actions_per_agent;
  return n;
}

std::size_t joint_index(std::span<const int> joint_action, std::size_t actions_per_agent) {
  std::size_t index = 0;
  for (int u : joint_action) {
    if (u < 0 || static_cast<std::size_t>(u) >= actions_per_agent) {
      throw EnvError("action " + std::to_string(u) + " outside [0, " +
                     std::to_string(actions_per_agent) + ")");
    }
    index = index * actions_per_agent + static_cast<std::size_t>(u);
  }
  return index;
}

std::vector<int> joint_from_index(std::size_t index, std::size_t num_agents,
                                  std::size_t actions_per_agent) {
  std::vector<int> joint(num_agents);
  for (std::size_t i = num_agents; i-- > 0;) {
    joint[i] = static_cast<int>(index % actions_per_agent);
    index /= actions_per_agent;
  }
  return joint;
}

std::string joint_label(std::span<const int> joint_action) {
  std::string label;
  for (int u : joint_action) label.push_back(static_cast<char>('A' + u));
  return label;
}

void MatrixGameSpec::validate() const {
  if (num_agents < 1) throw EnvError("matrix game: num_agents must be >= 1");
  if (actions_per_agent < 1 || actions_per_agent > 26) {
    throw EnvError("matrix game: actions_per_agent must be in [1, 26]");
  }
  if (states.empty()) throw EnvError("matrix game: at least one state is required");
  const std::size_t joint = joint_action_count(num_agents, actions_per_agent);
  double total = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const auto& s = states[k];
    if (!(s.probability >= 0.0) || !std::isfinite(s.probability)) {
      throw EnvError("matrix game: state " + std::to_string(k) + " has invalid probability");
    }
    if (s.payoff.size() != joint) {
      throw EnvError("matrix game: state " + std::to_string(k) + " payoff has " +
                     std::to_string(s.payoff.size()) + " entries, expected " +
                     std::to_string(joint));
    }
    for (double r : s.payoff) {
      if (!std::isfinite(r)) {
        throw EnvError("matrix game: state " + std::to_string(k) + " has a non-finite payoff");
      }
    }
    total += s.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw EnvError("matrix game: state probabilities sum to " + std::to_string(total));
  }
}

double expected_return_of_joint_action(const MatrixGameSpec& spec,
                                       std::span<const int> joint_action) {
  const std::size_t idx = joint_index(joint_action, spec.actions_per_agent);
  double total = 0.0;
  for (const auto& s : spec.states) total += s.probability * s.payoff.at(idx);
  return total;
}

MatrixGameSpec nondecentralizable_2x2() {
  MatrixGameSpec spec;
  spec.num_agents = 2;
  spec.actions_per_agent = 2;
  spec.state_observable = false;
  // rows: agent 0 action, cols: agent 1 action
  spec.states = {{0.5, {4.0, 2.0, 2.0, 0.0}}, {0.5, {0.0, 1.0, 1.0, 2.0}}};
  return spec;
}

MatrixGameSpec random_matrix_game(std::size_t num_agents, std::size_t actions_per_agent,
                                  std::size_t num_states, bool state_observable, Rng& rng,
                                  double payoff_scale) {
  MatrixGameSpec spec;
  spec.num_agents = num_agents;
  spec.actions_per_agent = actions_per_agent;
  spec.state_observable = state_observable;
  std::uniform_real_distribution<double> weight(1.0, 2.0);
  std::uniform_real_distribution<double> payoff(0.0, payoff_scale);
  const std::size_t joint = joint_action_count(num_agents, actions_per_agent);
  double total = 0.0;
  for (std::size_t k = 0; k < num_states; ++k) {
    MatrixState s;
    s.probability = weight(rng);
    total += s.probability;
    s.payoff.resize(joint);
    for (double& r : s.payoff) r = payoff(rng);
    spec.states.push_back(std::move(s));
  }
  for (auto& s : spec.states) s.probability /= total;
  spec.validate();
  return spec;
}

MatrixGame::MatrixGame(MatrixGameSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

std::size_t MatrixGame::obs_dim() const {
  return (spec_.state_observable ? spec_.states.size() : 1) + spec_.num_agents;
}

EnvStep MatrixGame::observe_state(std::size_t k) const {
  EnvStep step;
  const std::size_t n = spec_.num_agents;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> obs =
        spec_.state_observable ? one_hot(k, spec_.states.size()) : std::vector<double>{1.0};
    auto id = one_hot(i, n);
    obs.insert(obs.end(), id.begin(), id.end());
    step.observations.push_back(std::move(obs));
    step.available_actions.emplace_back(spec_.actions_per_agent, true);
  }
  step.state = one_hot(k, spec_.states.size());
  return step;
}

EnvStep MatrixGame::reset(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  current_ = spec_.states.size() - 1;
  for (std::size_t k = 0; k < spec_.states.size(); ++k) {
    acc += spec_.states[k].probability;
    if (x < acc) {
      current_ = k;
      break;
    }
  }
  done_ = false;
  return observe_state(current_);
}

EnvStep MatrixGame::step(std::span<const int> joint_action, Rng&) {
  if (done_) throw EnvError("matrix game: step called on a finished episode");
  if (joint_action.size() != spec_.num_agents) {
    throw EnvError("matrix game: expected " + std::to_string(spec_.num_agents) +
                   " actions, got " + std::to_string(joint_action.size()));
  }
  EnvStep out = observe_state(current_);
  out.reward = spec_.states[current_].payoff[joint_index(joint_action, spec_.actions_per_agent)];
  out.terminated = true;
  done_ = true;
  return out;
}

}  // namespace vfactor::env
