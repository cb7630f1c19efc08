#include "vfactor/algo/condition_chain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vfactor/env/matrix_game.hpp"

namespace vfactor::algo {

bool ChainStats::all_zero(double tol) const {
  return eq_ab.max <= tol && gt_ac.max <= tol && gt_cd.max <= tol && gt_ad.max <= tol;
}

ChainAccumulator::ChainAccumulator(std::size_t num_heads) : heads_(num_heads) {}

void ChainAccumulator::add_table(std::span<const double> q_jt,
                                 const std::vector<std::vector<double>>& q_tran,
                                 std::size_t u_bar) {
  if (q_tran.size() != heads_.size()) {
    throw std::invalid_argument("chain check: expected " + std::to_string(heads_.size()) +
                                " heads, got " + std::to_string(q_tran.size()));
  }
  if (u_bar >= q_jt.size()) throw std::out_of_range("chain check: greedy index out of range");
  const double a = q_jt[u_bar];
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    const auto& tran = q_tran[h];
    if (tran.size() != q_jt.size()) throw std::invalid_argument("chain check: table size mismatch");
    Sums& s = heads_[h];
    const double b = tran[u_bar];
    const double eq = std::abs(a - b);
    s.eq += eq;
    s.eq_max = std::max(s.eq_max, eq);
    ++s.eq_n;
    for (std::size_t j = 0; j < q_jt.size(); ++j) {
      const double c = tran[j];
      const double d = q_jt[j];
      s.under = std::max(s.under, d - c);
      double total = eq;
      if (j != u_bar) {
        const double ac = std::max(0.0, c - a);
        const double cd = std::max(0.0, d - c);
        const double ad = std::max(0.0, d - a);
        s.ac += ac;
        s.cd += cd;
        s.ad += ad;
        s.ac_max = std::max(s.ac_max, ac);
        s.cd_max = std::max(s.cd_max, cd);
        s.ad_max = std::max(s.ad_max, ad);
        ++s.strict_n;
        total += ac + cd + ad;
      }
      s.total += total;
      ++s.total_n;
    }
  }
  ++tables_;
}

ChainStats ChainAccumulator::result() const {
  ChainStats out;
  out.tables = tables_;
  auto ratio = [](double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; };
  Sums pooled;
  for (const auto& s : heads_) {
    HeadChainStats h;
    h.eq_ab = {ratio(s.eq, s.eq_n), s.eq_max};
    h.gt_ac = {ratio(s.ac, s.strict_n), s.ac_max};
    h.gt_cd = {ratio(s.cd, s.strict_n), s.cd_max};
    h.gt_ad = {ratio(s.ad, s.strict_n), s.ad_max};
    h.mean_total = ratio(s.total, s.total_n);
    h.worst_underestimate = std::max(0.0, s.under);
    out.heads.push_back(h);

    pooled.eq += s.eq;
    pooled.ac += s.ac;
    pooled.cd += s.cd;
    pooled.ad += s.ad;
    pooled.total += s.total;
    pooled.eq_n += s.eq_n;
    pooled.strict_n += s.strict_n;
    pooled.total_n += s.total_n;
    pooled.eq_max = std::max(pooled.eq_max, s.eq_max);
    pooled.ac_max = std::max(pooled.ac_max, s.ac_max);
    pooled.cd_max = std::max(pooled.cd_max, s.cd_max);
    pooled.ad_max = std::max(pooled.ad_max, s.ad_max);
  }
  out.eq_ab = {ratio(pooled.eq, pooled.eq_n), pooled.eq_max};
  out.gt_ac = {ratio(pooled.ac, pooled.strict_n), pooled.ac_max};
  out.gt_cd = {ratio(pooled.cd, pooled.strict_n), pooled.cd_max};
  out.gt_ad = {ratio(pooled.ad, pooled.strict_n), pooled.ad_max};
  out.mean_total = ratio(pooled.total, pooled.total_n);
  return out;
}

ChainStats chain_violations(std::span<const double> q_jt,
                            const std::vector<std::vector<double>>& q_tran, std::size_t u_bar) {
  ChainAccumulator acc(q_tran.size());
  acc.add_table(q_jt, q_tran, u_bar);
  return acc.result();
}

JointTables joint_tables(const nets::FactoredValueModel& model, const ad::ParameterStore& store,
                         std::span<const double> state,
                         const std::vector<std::vector<double>>& q_vectors,
                         const std::vector<std::vector<bool>>& masks) {
  const std::size_t N = model.dims().num_agents;
  const std::size_t A = model.dims().num_actions;
  if (q_vectors.size() != N) throw std::invalid_argument("joint_tables: wrong agent count");
  ad::NoGradGuard no_grad;
  const ad::DiffValue q = nets::enumerate_joint_utilities(q_vectors);
  const std::size_t J = q.rows();
  std::vector<double> states;
  states.reserve(J * state.size());
  for (std::size_t j = 0; j < J; ++j) states.insert(states.end(), state.begin(), state.end());
  const auto s = ad::DiffValue::constant({J, state.size()}, std::move(states));

  JointTables out;
  const ad::DiffValue jt = model.joint_value(store, q, s);
  out.q_jt.assign(jt.data().begin(), jt.data().end());
  for (const auto& head : model.transformed_values(store, q, s)) {
    out.q_tran.emplace_back(head.data().begin(), head.data().end());
  }
  out.greedy = nets::greedy_joint_action(q_vectors, masks);
  out.greedy_index = env::joint_index(out.greedy, A);
  return out;
}

ChainStats condition_chain_check(const nets::FactoredValueModel& model,
                                 const ad::ParameterStore& store, std::span<const double> state,
                                 const std::vector<std::vector<double>>& q_vectors,
                                 const std::vector<std::vector<bool>>& masks) {
  const JointTables t = joint_tables(model, store, state, q_vectors, masks);
  ChainStats out = chain_violations(t.q_jt, t.q_tran, t.greedy_index);
  out.structurally_monotone = model.architecture().transformed != nets::TransformedKind::None;
  return out;
}

DecentralizationConditions check_decentralization_conditions(const std::vector<std::vector<double>>& utilities,
                                           std::span<const double> q_jt,
                                           std::span<const double> q_tran,
                                           std::span<const int> u_bar) {
  const std::size_t N = utilities.size();
  const std::size_t A = N ? utilities[0].size() : 0;
  const std::size_t J = env::joint_action_count(N, A);
  if (q_jt.size() != J || q_tran.size() != J || u_bar.size() != N) {
    throw std::invalid_argument("check_decentralization_conditions: table sizes do not match");
  }
  DecentralizationConditions out;
  const std::size_t bar = env::joint_index(u_bar, A);
  out.optimal_gap = std::abs(q_tran[bar] - q_jt[bar]);
  for (std::size_t j = 0; j < J; ++j) {
    out.underestimate = std::max(out.underestimate, q_jt[j] - q_tran[j]);
  }
  out.underestimate = std::max(0.0, out.underestimate);

  for (std::size_t j = 0; j < J; ++j) {
    auto joint = env::joint_from_index(j, N, A);
    for (std::size_t i = 0; i < N; ++i) {
      const int own = joint[i];
      for (std::size_t alt = 0; alt < A; ++alt) {
        if (utilities[i][alt] < utilities[i][static_cast<std::size_t>(own)]) continue;
        joint[i] = static_cast<int>(alt);
        const double raised = q_tran[env::joint_index(joint, A)];
        out.monotonicity = std::max(out.monotonicity, q_tran[j] - raised);
        joint[i] = own;
      }
    }
  }

  out.greedy_consistent = true;
  for (std::size_t i = 0; i < N; ++i) {
    const auto& q = utilities[i];
    const auto best = static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
    if (best != u_bar[i]) out.greedy_consistent = false;
  }
  return out;
}

std::vector<std::size_t> argmax_set(std::span<const double> values) {
  std::vector<std::size_t> out;
  if (values.empty()) return out;
  const double best = *std::max_element(values.begin(), values.end());
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (values[j] == best) out.push_back(j);
  }
  return out;
}

}  // namespace vfactor::algo
