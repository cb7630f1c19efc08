#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vfactor/autodiff/parameter_store.hpp"
#include "vfactor/nets/model.hpp"

namespace vfactor::algo {

// Relations of the decentralization chain for a greedy joint action u_bar and
// any other joint action u:
//   (a) Q_jt(u_bar) = (b) Q_tran(u_bar) > (c) Q_tran(u) > (d) Q_jt(u)
// Violations are non-negative gaps with zero margin:
//   eq_ab = |a - b|, gt_ac = max(0, c - a), gt_cd = max(0, d - c),
//   gt_ad = max(0, d - a).
// The strict relations are measured over u != u_bar only.

struct RelationStats {
  double mean = 0.0;
  double max = 0.0;
};

struct HeadChainStats {
  RelationStats eq_ab;
  RelationStats gt_ac;
  RelationStats gt_cd;
  RelationStats gt_ad;
  /// Mean over every joint action of eq_ab + (u != u_bar) * (gt_ac + gt_cd + gt_ad).
  double mean_total = 0.0;
  /// Largest Q_jt(u) - Q_tran(u) over all u, floored at 0.
  double worst_underestimate = 0.0;
};

struct ChainStats {
  std::vector<HeadChainStats> heads;
  // Pooled over heads.
  RelationStats eq_ab;
  RelationStats gt_ac;
  RelationStats gt_cd;
  RelationStats gt_ad;
  double mean_total = 0.0;
  /// Q_tran is non-decreasing in every utility by construction.
  bool structurally_monotone = false;
  std::size_t tables = 0;

  bool all_zero(double tol = 0.0) const;
};

/// Accumulates chain statistics over many (state, history) tables.
class ChainAccumulator {
 public:
  explicit ChainAccumulator(std::size_t num_heads);

  /// q_jt[j] and q_tran[h][j] over joint actions j; u_bar indexes the greedy one.
  void add_table(std::span<const double> q_jt, const std::vector<std::vector<double>>& q_tran,
                 std::size_t u_bar);
  ChainStats result() const;
  std::size_t tables() const { return tables_; }

 private:
  struct Sums {
    double eq = 0, ac = 0, cd = 0, ad = 0, total = 0;
    double eq_max = 0, ac_max = 0, cd_max = 0, ad_max = 0, under = 0;
    std::size_t eq_n = 0, strict_n = 0, total_n = 0;
  };
  std::vector<Sums> heads_;
  std::size_t tables_ = 0;
};

ChainStats chain_violations(std::span<const double> q_jt,
                            const std::vector<std::vector<double>>& q_tran, std::size_t u_bar);

/// Enumerates every joint action for one state and per-agent q-vectors and
/// reports the chain statistics of the model's estimators there.
ChainStats condition_chain_check(const nets::FactoredValueModel& model,
                                 const ad::ParameterStore& store, std::span<const double> state,
                                 const std::vector<std::vector<double>>& q_vectors,
                                 const std::vector<std::vector<bool>>& masks = {});

/// Q-tables for one state: Q_jt and each Q_tran head over every joint action.
struct JointTables {
  std::vector<double> q_jt;
  std::vector<std::vector<double>> q_tran;
  std::vector<int> greedy;
  std::size_t greedy_index = 0;
};

JointTables joint_tables(const nets::FactoredValueModel& model, const ad::ParameterStore& store,
                         std::span<const double> state,
                         const std::vector<std::vector<double>>& q_vectors,
                         const std::vector<std::vector<bool>>& masks = {});

// Sufficient conditions for decentralization, checked on explicit tables:
// Q_tran(u_bar) = Q_jt(u_bar); Q_tran(u) >= Q_jt(u) everywhere; Q_tran
// non-decreasing in each q_i (over single-agent deviations); u_bar is the
// per-agent argmax of the utilities.
struct DecentralizationConditions {
  double optimal_gap = 0.0;
  double underestimate = 0.0;  // worst max(0, Q_jt - Q_tran)
  double monotonicity = 0.0;   // worst decrease
  bool greedy_consistent = false;

  bool satisfied(double tol = 1e-12) const {
    return optimal_gap <= tol && underestimate <= tol && monotonicity <= tol && greedy_consistent;
  }
};

DecentralizationConditions check_decentralization_conditions(const std::vector<std::vector<double>>& utilities,
                                           std::span<const double> q_jt,
                                           std::span<const double> q_tran,
                                           std::span<const int> u_bar);

/// Every joint index attaining the maximum of `values`, in increasing order.
std::vector<std::size_t> argmax_set(std::span<const double> values);

}  // namespace vfactor::algo
