#include "vfactor/algo/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vfactor::algo {
namespace {

using ad::DiffValue;

DiffValue stack_slots(const std::vector<DiffValue>& slots, std::size_t begin, std::size_t end) {
  std::vector<DiffValue> parts(slots.begin() + static_cast<std::ptrdiff_t>(begin),
                               slots.begin() + static_cast<std::ptrdiff_t>(end));
  return ad::concat_rows(parts);
}

DiffValue state_rows(const data::EpisodeBatch& batch, std::size_t first_slot) {
  const std::size_t n = batch.max_steps * batch.batch_size * batch.state_dim;
  const auto begin = batch.state.begin() +
                     static_cast<std::ptrdiff_t>(first_slot * batch.batch_size * batch.state_dim);
  return DiffValue::constant({batch.max_steps * batch.batch_size, batch.state_dim},
                             std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(n)));
}

std::span<const std::uint8_t> avail_rows(const data::EpisodeBatch& batch, std::size_t first_slot) {
  const std::size_t per_slot = batch.batch_size * batch.num_agents * batch.num_actions;
  return std::span<const std::uint8_t>(batch.avail).subspan(first_slot * per_slot,
                                                            batch.max_steps * per_slot);
}

// Utilities [R*N, A] and per-row action indices -> chosen utilities [R, N].
DiffValue chosen(const DiffValue& q, std::span<const std::size_t> actions, std::size_t agents) {
  return ad::reshape(ad::pick_cols(q, actions), {q.rows() / agents, agents});
}

std::vector<std::size_t> iota_from(std::size_t begin, std::size_t count) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), begin);
  return idx;
}

DiffValue column(const DiffValue& weights, std::size_t h) {
  return ad::slice_cols(weights, h, h + 1);
}

BatchViolation batch_violation(const BatchEstimates& est) {
  BatchViolation out;
  const std::size_t heads = est.q_tran_u.size();
  if (heads == 0) return out;
  auto filled = est.filled.data();
  auto jt_u = est.q_jt_u.data();
  auto jt_bar = est.q_jt_ubar.data();
  double eq_n = 0, strict_n = 0;
  for (std::size_t h = 0; h < heads; ++h) {
    auto tr_u = est.q_tran_u[h].data();
    auto tr_bar = est.q_tran_ubar[h].data();
    for (std::size_t r = 0; r < est.rows; ++r) {
      if (filled[r] == 0.0) continue;
      out.eq_ab += std::abs(jt_bar[r] - tr_bar[r]);
      eq_n += 1;
      if (est.is_greedy[r]) continue;
      out.gt_ac += std::max(0.0, tr_u[r] - jt_bar[r]);
      out.gt_cd += std::max(0.0, jt_u[r] - tr_u[r]);
      out.gt_ad += std::max(0.0, jt_u[r] - jt_bar[r]);
      strict_n += 1;
    }
  }
  if (eq_n > 0) out.eq_ab /= eq_n;
  if (strict_n > 0) {
    out.gt_ac /= strict_n;
    out.gt_cd /= strict_n;
    out.gt_ad /= strict_n;
  }
  return out;
}

}  // namespace

BatchEstimates estimate_batch(const nets::FactoredValueModel& model,
                              const ad::ParameterStore& online, const ad::ParameterStore& target,
                              const data::EpisodeBatch& batch, double gamma,
                              bool detach_joint_inputs, bool own_head_utilities) {
  const std::size_t T = batch.max_steps;
  const std::size_t B = batch.batch_size;
  const std::size_t N = batch.num_agents;
  const std::size_t R = T * B;

  BatchEstimates est;
  est.rows = R;
  est.filled = DiffValue::constant({R, 1}, batch.filled);
  est.valid = std::accumulate(batch.filled.begin(), batch.filled.end(), 0.0);

  // The slot after the last step only matters when some row bootstraps.
  bool bootstraps = false;
  for (std::size_t r = 0; r < R; ++r) {
    if (batch.filled[r] != 0.0 && batch.terminal[r] == 0.0) bootstraps = true;
  }
  const auto utilities =
      nets::compute_utilities(model.utility(), online, batch, bootstraps ? T + 1 : T);
  const DiffValue q_now = stack_slots(utilities, 0, T);

  std::vector<std::size_t> taken(batch.actions.begin(), batch.actions.end());
  est.greedy = nets::greedy_actions(q_now, avail_rows(batch, 0));
  est.is_greedy.assign(R, 1);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < N; ++i) {
      if (taken[r * N + i] != est.greedy[r * N + i]) est.is_greedy[r] = 0;
    }
  }

  const DiffValue q_u = chosen(q_now, taken, N);
  const DiffValue q_bar = chosen(q_now, est.greedy, N);
  const DiffValue states = state_rows(batch, 0);

  // Both action sets go through each estimator as one stacked batch.
  const DiffValue q_both = ad::concat_rows(std::vector<DiffValue>{q_u, q_bar});
  const DiffValue s_both = ad::concat_rows(std::vector<DiffValue>{states, states});
  const auto first = iota_from(0, R);
  const auto second = iota_from(R, R);

  const DiffValue jt = model.joint_value(online, q_both, s_both);
  est.q_jt_u = ad::gather_rows(jt, first);
  est.q_jt_ubar = ad::gather_rows(jt, second);
  if (detach_joint_inputs) {
    const DiffValue cut = model.joint_value(online, ad::detach(q_both), s_both);
    est.imitation_jt_u = ad::gather_rows(cut, first);
    est.imitation_jt_ubar = ad::gather_rows(cut, second);
  } else {
    est.imitation_jt_u = est.q_jt_u;
    est.imitation_jt_ubar = est.q_jt_ubar;
  }
  for (const auto& head : model.transformed_values(online, q_both, s_both, own_head_utilities)) {
    est.q_tran_u.push_back(ad::gather_rows(head, first));
    est.q_tran_ubar.push_back(ad::gather_rows(head, second));
  }

  if (!bootstraps || gamma == 0.0) {
    est.td_target = DiffValue::constant({R, 1}, batch.reward);
  } else {
    ad::NoGradGuard no_grad;
    const DiffValue q_next_online = stack_slots(utilities, 1, T + 1);
    const auto next_greedy = nets::greedy_actions(q_next_online, avail_rows(batch, 1));
    const auto target_utilities = nets::compute_utilities(model.utility(), target, batch);
    const DiffValue q_next = chosen(stack_slots(target_utilities, 1, T + 1), next_greedy, N);
    const DiffValue bootstrap = model.joint_value(target, q_next, state_rows(batch, 1));
    std::vector<double> y(R);
    auto boot = bootstrap.data();
    for (std::size_t r = 0; r < R; ++r) {
      y[r] = batch.reward[r] + gamma * (1.0 - batch.terminal[r]) * boot[r];
    }
    est.td_target = DiffValue::constant({R, 1}, std::move(y));
  }
  return est;
}

DiffValue head_weights(std::size_t rows, std::size_t heads, HeadMode mode, std::mt19937_64* rng) {
  if (heads == 0) return DiffValue::scalar(0.0);
  if (mode == HeadMode::Average || rng == nullptr) {
    return DiffValue::filled({rows, heads}, 1.0 / static_cast<double>(heads));
  }
  std::vector<double> w(rows * heads, 0.0);
  std::uniform_int_distribution<std::size_t> pick(0, heads - 1);
  for (std::size_t r = 0; r < rows; ++r) w[r * heads + pick(*rng)] = 1.0;
  return DiffValue::constant({rows, heads}, std::move(w));
}

DiffValue opt_terms(const DiffValue& q_jt_ubar, const DiffValue& q_tran_ubar, bool freeze_joint) {
  const DiffValue jt = freeze_joint ? ad::detach(q_jt_ubar) : q_jt_ubar;
  return ad::square(jt - q_tran_ubar);
}

DiffValue nopt_terms(const DiffValue& q_jt_u, const DiffValue& q_jt_ubar, const DiffValue& q_tran_u,
                     bool freeze_joint) {
  const std::size_t R = q_jt_u.rows();
  const DiffValue jt_u = freeze_joint ? ad::detach(q_jt_u) : q_jt_u;
  auto u = q_jt_u.data();
  auto bar = q_jt_ubar.data();

  std::vector<double> above(R), below(R);
  for (std::size_t r = 0; r < R; ++r) {
    const bool hi_branch = u[r] >= bar[r];
    above[r] = hi_branch ? 1.0 : 0.0;
    below[r] = hi_branch ? 0.0 : 1.0;
  }
  const auto m_above = DiffValue::constant({R, 1}, std::move(above));
  const auto m_below = DiffValue::constant({R, 1}, std::move(below));
  // Rows of the other branch get an empty band [hi, hi] so the clip stays defined.
  const DiffValue hi = ad::detach(m_above * jt_u + m_below * q_jt_ubar);
  const DiffValue lo = m_below * jt_u + m_above * hi;

  const DiffValue imitate = ad::square(jt_u - q_tran_u);
  const DiffValue clipped = ad::clip(ad::detach(q_tran_u), lo, hi);
  const DiffValue banded = ad::square(clipped - q_tran_u);
  return m_above * imitate + m_below * banded;
}

DiffValue original_opt_terms(const DiffValue& q_jt_ubar, const DiffValue& q_tran_ubar) {
  return ad::square(ad::detach(q_jt_ubar) - q_tran_ubar);
}

DiffValue original_nopt_terms(const DiffValue& q_jt_u, const DiffValue& q_tran_u) {
  return ad::square(ad::detach(ad::maximum(q_jt_u, q_tran_u)) - q_tran_u);
}

DiffValue masked_mean(const DiffValue& terms, const DiffValue& filled, double valid) {
  if (valid <= 0.0) return DiffValue::scalar(0.0);
  return ad::scale(ad::sum(terms * filled), 1.0 / valid);
}

DiffValue loss_td(const BatchEstimates& est) {
  return masked_mean(ad::square(est.q_jt_u - est.td_target), est.filled, est.valid);
}

namespace {

const DiffValue& imitation_u(const BatchEstimates& est) {
  return est.imitation_jt_u.defined() ? est.imitation_jt_u : est.q_jt_u;
}

const DiffValue& imitation_ubar(const BatchEstimates& est) {
  return est.imitation_jt_ubar.defined() ? est.imitation_jt_ubar : est.q_jt_ubar;
}

template <typename Kernel>
DiffValue over_heads(const BatchEstimates& est, const DiffValue& weights, Kernel kernel) {
  if (est.q_tran_u.empty()) return DiffValue::scalar(0.0);
  std::vector<DiffValue> parts;
  for (std::size_t h = 0; h < est.q_tran_u.size(); ++h) {
    parts.push_back(kernel(h) * column(weights, h));
  }
  DiffValue acc = parts[0];
  for (std::size_t h = 1; h < parts.size(); ++h) acc = acc + parts[h];
  return masked_mean(acc, est.filled, est.valid);
}

}  // namespace

DiffValue loss_opt(const BatchEstimates& est, const AlgorithmSpec& spec, const DiffValue& weights) {
  return over_heads(est, weights, [&](std::size_t h) {
    return opt_terms(imitation_ubar(est), est.q_tran_ubar[h], spec.freezes_joint());
  });
}

DiffValue loss_nopt(const BatchEstimates& est, const AlgorithmSpec& spec, const DiffValue& weights) {
  return over_heads(est, weights, [&](std::size_t h) {
    return nopt_terms(imitation_u(est), imitation_ubar(est), est.q_tran_u[h], spec.freezes_joint());
  });
}

OriginalLosses loss_qtran_original(const BatchEstimates& est, const DiffValue& weights) {
  OriginalLosses out;
  out.l_opt = over_heads(est, weights, [&](std::size_t h) {
    return original_opt_terms(imitation_ubar(est), est.q_tran_ubar[h]);
  });
  out.l_nopt = over_heads(est, weights, [&](std::size_t h) {
    return original_nopt_terms(imitation_u(est), est.q_tran_u[h]);
  });
  return out;
}

LossBreakdown combined_loss(const BatchEstimates& est, const AlgorithmSpec& spec,
                            std::mt19937_64* head_rng) {
  spec.validate();
  LossBreakdown out;
  const DiffValue td = loss_td(est);
  out.l_td = td.item();
  if (!spec.has_transformed()) {
    out.total = out.l_td;
    out.total_node = td;
    return out;
  }
  const DiffValue w = head_weights(est.rows, est.q_tran_u.size(), spec.head_mode, head_rng);
  DiffValue opt, nopt;
  if (spec.uses_original_losses()) {
    auto orig = loss_qtran_original(est, w);
    opt = orig.l_opt;
    nopt = orig.l_nopt;
  } else {
    opt = loss_opt(est, spec, w);
    nopt = loss_nopt(est, spec, w);
  }
  out.l_opt = opt.item();
  out.l_nopt = nopt.item();
  out.total_node = td + spec.lambda_opt * opt + spec.lambda_nopt * nopt;
  out.total = out.total_node.item();
  out.violation = batch_violation(est);
  return out;
}

LossBreakdown combined_loss(const nets::FactoredValueModel& model, const ad::ParameterStore& online,
                            const ad::ParameterStore& target, const data::EpisodeBatch& batch,
                            const AlgorithmSpec& spec, std::mt19937_64* head_rng) {
  return combined_loss(
      estimate_batch(model, online, target, batch, spec.gamma, spec.detach_joint_inputs,
                     spec.own_head_utilities), spec,
      head_rng);
}

}  // namespace vfactor::algo
