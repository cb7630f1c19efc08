#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "vfactor/algo/algorithm_spec.hpp"
#include "vfactor/autodiff/ops.hpp"
#include "vfactor/data/episode.hpp"
#include "vfactor/nets/model.hpp"

namespace vfactor::algo {

/// Estimator outputs for every (t, b) row of a padded batch, row = t * B + b.
struct BatchEstimates {
  std::size_t rows = 0;
  ad::DiffValue filled;                      // [R, 1] constant, 1 on real steps
  double valid = 0.0;                        // number of real steps
  ad::DiffValue q_jt_u;                      // Q_jt at the stored action
  ad::DiffValue q_jt_ubar;                   // Q_jt at the greedy action
  // Q_jt as seen by L_opt / L_nopt; the same nodes unless the joint
  // estimator's inputs are detached there. Undefined falls back to the above.
  ad::DiffValue imitation_jt_u;
  ad::DiffValue imitation_jt_ubar;
  std::vector<ad::DiffValue> q_tran_u;       // per head
  std::vector<ad::DiffValue> q_tran_ubar;    // per head
  ad::DiffValue td_target;                   // [R, 1] constant
  std::vector<std::size_t> greedy;           // [R * N]
  std::vector<std::uint8_t> is_greedy;       // [R], stored action == greedy
};

/// Forward pass for a loss evaluation. ū comes from the online utilities; the
/// bootstrap Q_jt^target(s', ū') uses ū' from the online utilities at the next
/// slot and the target store for everything else.
BatchEstimates estimate_batch(const nets::FactoredValueModel& model,
                              const ad::ParameterStore& online, const ad::ParameterStore& target,
                              const data::EpisodeBatch& batch, double gamma,
                              bool detach_joint_inputs = false, bool own_head_utilities = false);

/// Per-row weights [R, H] for the transformed heads. Average mode gives 1/H
/// everywhere; random mode puts 1 on one uniformly drawn head per row.
ad::DiffValue head_weights(std::size_t rows, std::size_t heads, HeadMode mode,
                           std::mt19937_64* rng);

// Elementwise loss terms on [R, 1] columns.

/// (Q_jt(ū) - Q_tran(ū))^2, Q_jt detached when `freeze_joint`.
ad::DiffValue opt_terms(const ad::DiffValue& q_jt_ubar, const ad::DiffValue& q_tran_ubar,
                        bool freeze_joint);

/// Case split on detached Q_jt values. Rows with Q_jt(u) >= Q_jt(ū) regress
/// Q_jt(u) and Q_tran(u) onto each other. Other rows regress Q_tran(u) onto
/// clip(Q_tran(u), Q_jt(u), Q_jt(ū)), whose lower bound stays live and whose
/// upper bound is fixed.
ad::DiffValue nopt_terms(const ad::DiffValue& q_jt_u, const ad::DiffValue& q_jt_ubar,
                         const ad::DiffValue& q_tran_u, bool freeze_joint);

/// (detach(Q_jt(ū)) - Q_tran(ū))^2
ad::DiffValue original_opt_terms(const ad::DiffValue& q_jt_ubar, const ad::DiffValue& q_tran_ubar);
/// (detach(max(Q_jt(u), Q_tran(u))) - Q_tran(u))^2
ad::DiffValue original_nopt_terms(const ad::DiffValue& q_jt_u, const ad::DiffValue& q_tran_u);

/// Sum over rows of terms * filled, divided by `valid`.
ad::DiffValue masked_mean(const ad::DiffValue& terms, const ad::DiffValue& filled, double valid);

ad::DiffValue loss_td(const BatchEstimates& est);
ad::DiffValue loss_opt(const BatchEstimates& est, const AlgorithmSpec& spec,
                       const ad::DiffValue& weights);
ad::DiffValue loss_nopt(const BatchEstimates& est, const AlgorithmSpec& spec,
                        const ad::DiffValue& weights);

struct OriginalLosses {
  ad::DiffValue l_opt;
  ad::DiffValue l_nopt;
};
OriginalLosses loss_qtran_original(const BatchEstimates& est, const ad::DiffValue& weights);

/// Mean gaps of the chain relations over the batch rows, computed at the
/// stored and greedy actions only. Strict relations skip rows where u == ū.
struct BatchViolation {
  double eq_ab = 0.0;
  double gt_ac = 0.0;
  double gt_cd = 0.0;
  double gt_ad = 0.0;
};

struct LossBreakdown {
  double l_td = 0.0;
  double l_opt = 0.0;
  double l_nopt = 0.0;
  double total = 0.0;
  BatchViolation violation;
  ad::DiffValue total_node;
};

LossBreakdown combined_loss(const BatchEstimates& est, const AlgorithmSpec& spec,
                            std::mt19937_64* head_rng = nullptr);

LossBreakdown combined_loss(const nets::FactoredValueModel& model, const ad::ParameterStore& online,
                            const ad::ParameterStore& target, const data::EpisodeBatch& batch,
                            const AlgorithmSpec& spec, std::mt19937_64* head_rng = nullptr);

}  // namespace vfactor::algo
