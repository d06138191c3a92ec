// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#include "toxred/grpo.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "toxred/rng.hpp"

namespace toxred::grpo {

namespace {

const VectorXd& logits_for(const PolicyLogits& logits, const std::string& query_id) {
  auto it = logits.find(query_id);
  if (it == logits.end()) {
    raise(ErrorKind::kInvalidArgument, "unknown query id: " + query_id);
  }
  return it->second;
}

void check_rollout_shape(const GroupRollout& rollout, const VectorXd& logits) {
  const std::size_t g = rollout.responses.size();
  if (g < 2) {
    raise(ErrorKind::kInvalidArgument,
          "rollout for '" + rollout.query_id + "' has fewer than 2 samples");
  }
  if (rollout.advantages.size() != g) {
    raise(ErrorKind::kInvalidArgument,
          "rollout for '" + rollout.query_id + "': advantage count mismatch");
  }
  for (double a : rollout.advantages) {
    if (!std::isfinite(a)) {
      raise(ErrorKind::kInvalidArgument,
            "rollout for '" + rollout.query_id + "': non-finite advantage");
    }
  }
  for (int r : rollout.responses) {
    if (r < 0 || r >= logits.size()) {
      raise(ErrorKind::kInvalidArgument,
            "rollout for '" + rollout.query_id + "': response index out of range");
    }
  }
}

}  // namespace

void ToyPolicy::validate() const {
  if (logits.empty()) {
    raise(ErrorKind::kInvalidArgument, "policy has no queries");
  }
  for (const auto& [query_id, z] : logits) {
    if (z.size() < 2) {
      raise(ErrorKind::kInvalidArgument,
            "policy for '" + query_id + "' needs K >= 2 responses");
    }
    auto ref = reference_logits.find(query_id);
    if (ref == reference_logits.end() || ref->second.size() != z.size()) {
      raise(ErrorKind::kInvalidArgument,
            "reference logits missing or mismatched for '" + query_id + "'");
    }
  }
}

void GrpoConfig::validate() const {
  if (group_size < 2) raise(ErrorKind::kConfig, "group_size must be >= 2");
  if (!(clip_epsilon > 0.0)) raise(ErrorKind::kConfig, "clip_epsilon must be > 0");
  if (kl_coefficient < 0.0) raise(ErrorKind::kConfig, "kl_coefficient must be >= 0");
  if (advantage_epsilon < 0.0) {
    raise(ErrorKind::kConfig, "advantage_epsilon must be >= 0");
  }
  if (!(learning_rate > 0.0)) raise(ErrorKind::kConfig, "learning_rate must be > 0");
  if (iterations < 1) raise(ErrorKind::kConfig, "iterations must be >= 1");
}

VectorXd softmax(const VectorXd& logits) {
  const double zmax = logits.maxCoeff();
  VectorXd e = (logits.array() - zmax).exp();
  return e / e.sum();
}

std::vector<double> normalize_advantages(std::span<const double> group_rewards,
                                         double eps) {
  if (group_rewards.size() < 2) {
    raise(ErrorKind::kInvalidArgument,
          "normalize_advantages: group size must be >= 2");
  }
  if (eps < 0.0) {
    raise(ErrorKind::kInvalidArgument, "normalize_advantages: eps must be >= 0");
  }
  const double g = static_cast<double>(group_rewards.size());
  double mean = 0.0;
  for (double r : group_rewards) mean += r;
  mean /= g;
  double var = 0.0;
  for (double r : group_rewards) var += (r - mean) * (r - mean);
  var /= g;  // population variance
  const double stddev = std::sqrt(var);
  std::vector<double> advantages(group_rewards.size(), 0.0);
  if (stddev == 0.0) {
    return advantages;  // identical rewards carry no signal
  }
  for (std::size_t i = 0; i < group_rewards.size(); ++i) {
    advantages[i] = (group_rewards[i] - mean) / (stddev + eps);
  }
  return advantages;
}

double clipped_surrogate(double ratio, double advantage, double clip_epsilon) {
  if (!(ratio > 0.0)) {
    raise(ErrorKind::kInvalidArgument, "clipped_surrogate: ratio must be > 0");
  }
  const double lo = 1.0 - clip_epsilon;
  const double hi = 1.0 + clip_epsilon;
  const double clamped = std::min(std::max(ratio, lo), hi);
  return std::min(ratio * advantage, clamped * advantage);
}

double kl_divergence(const VectorXd& policy_probs,
                     const VectorXd& reference_probs) {
  if (policy_probs.size() != reference_probs.size()) {
    raise(ErrorKind::kInvalidArgument, "kl_divergence: size mismatch");
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < policy_probs.size(); ++i) {
    const double p = policy_probs[i];
    const double q = reference_probs[i];
    if (p < 0.0 || q < 0.0) {
      raise(ErrorKind::kInvalidArgument, "kl_divergence: negative probability");
    }
    if (p == 0.0) continue;  // 0 * ln 0 = 0
    if (q == 0.0) {
      raise(ErrorKind::kInvalidArgument,
            "kl_divergence: reference probability 0 where policy > 0");
    }
    kl += p * std::log(p / q);
  }
  return kl;
}

namespace {

// Surrogate contribution and, via `unclipped_active`, whether the min picked
// the branch whose derivative in the ratio is nonzero.
double surrogate_with_branch(double ratio, double advantage, double clip_epsilon,
                             bool* unclipped_active) {
  const double lo = 1.0 - clip_epsilon;
  const double hi = 1.0 + clip_epsilon;
  const double clamped = std::min(std::max(ratio, lo), hi);
  const double unclipped = ratio * advantage;
  const double clipped = clamped * advantage;
  if (unclipped <= clipped) {
    *unclipped_active = true;
    return unclipped;
  }
  // The clipped branch is flat only outside [lo, hi].
  *unclipped_active = (ratio >= lo && ratio <= hi);
  return clipped;
}

}  // namespace

double grpo_objective(const PolicyLogits& theta, const PolicyLogits& old_logits,
                      const PolicyLogits& reference_logits,
                      std::span<const GroupRollout> rollouts,
                      const GrpoConfig& config) {
  config.validate();
  if (rollouts.empty()) {
    raise(ErrorKind::kInvalidArgument, "grpo_objective: no rollouts");
  }
  double total = 0.0;
  for (const GroupRollout& rollout : rollouts) {
    const VectorXd& z = logits_for(theta, rollout.query_id);
    const VectorXd& z_old = logits_for(old_logits, rollout.query_id);
    const VectorXd& z_ref = logits_for(reference_logits, rollout.query_id);
    if (z_old.size() != z.size() || z_ref.size() != z.size()) {
      raise(ErrorKind::kInvalidArgument,
            "grpo_objective: logit shape mismatch for '" + rollout.query_id + "'");
    }
    check_rollout_shape(rollout, z);
    const VectorXd probs = softmax(z);
    const VectorXd old_probs = softmax(z_old);
    const VectorXd ref_probs = softmax(z_ref);

    double group_term = 0.0;
    for (std::size_t i = 0; i < rollout.responses.size(); ++i) {
      const int a = rollout.responses[i];
      const double ratio = probs[a] / old_probs[a];
      group_term += clipped_surrogate(ratio, rollout.advantages[i],
                                      config.clip_epsilon);
    }
    group_term /= static_cast<double>(rollout.responses.size());
    group_term -= config.kl_coefficient * kl_divergence(probs, ref_probs);
    total += group_term;
  }
  return total / static_cast<double>(rollouts.size());
}

PolicyLogits grpo_gradient(const PolicyLogits& theta,
                           const PolicyLogits& old_logits,
                           const PolicyLogits& reference_logits,
                           std::span<const GroupRollout> rollouts,
                           const GrpoConfig& config) {
  config.validate();
  if (rollouts.empty()) {
    raise(ErrorKind::kInvalidArgument, "grpo_gradient: no rollouts");
  }
  PolicyLogits grad;
  for (const auto& [query_id, z] : theta) {
    grad[query_id] = VectorXd::Zero(z.size());
  }
  const double group_weight = 1.0 / static_cast<double>(rollouts.size());
  for (const GroupRollout& rollout : rollouts) {
    const VectorXd& z = logits_for(theta, rollout.query_id);
    const VectorXd& z_old = logits_for(old_logits, rollout.query_id);
    const VectorXd& z_ref = logits_for(reference_logits, rollout.query_id);
    check_rollout_shape(rollout, z);
    const VectorXd probs = softmax(z);
    const VectorXd old_probs = softmax(z_old);
    const VectorXd ref_probs = softmax(z_ref);
    VectorXd g = VectorXd::Zero(z.size());

    // Surrogate: d ratio / d z = ratio * (e_a - probs).
    const double sample_weight = 1.0 / static_cast<double>(rollout.responses.size());
    for (std::size_t i = 0; i < rollout.responses.size(); ++i) {
      const int a = rollout.responses[i];
      const double ratio = probs[a] / old_probs[a];
      bool unclipped_active = false;
      (void)surrogate_with_branch(ratio, rollout.advantages[i],
                                  config.clip_epsilon, &unclipped_active);
      if (!unclipped_active) continue;
      const double scale = sample_weight * rollout.advantages[i] * ratio;
      g -= scale * probs;
      g[a] += scale;
    }

    // KL: d KL / d z_k = p_k * (ln(p_k / q_k) - KL).
    if (config.kl_coefficient > 0.0) {
      const double kl = kl_divergence(probs, ref_probs);
      for (Eigen::Index k = 0; k < z.size(); ++k) {
        const double p = probs[k];
        if (p == 0.0) continue;
        g[k] -= config.kl_coefficient * p * (std::log(p / ref_probs[k]) - kl);
      }
    }
    grad[rollout.query_id] += group_weight * g;
  }
  return grad;
}

ToyPolicy grpo_step(const ToyPolicy& policy,
                    std::span<const GroupRollout> rollouts,
                    const GrpoConfig& config) {
  policy.validate();
  const PolicyLogits grad = grpo_gradient(policy.logits, policy.logits,
                                          policy.reference_logits, rollouts,
                                          config);
  ToyPolicy updated = policy;
  for (const auto& [query_id, g] : grad) {
    updated.logits[query_id] += config.learning_rate * g;
  }
  return updated;
}

void SyntheticEnv::validate() const {
  if (query_ids.empty()) {
    raise(ErrorKind::kInvalidArgument, "synthetic env has no queries");
  }
  weights.validate();
  for (const std::string& query_id : query_ids) {
    auto it = outcomes.find(query_id);
    if (it == outcomes.end() || it->second.size() < 2) {
      raise(ErrorKind::kInvalidArgument,
            "synthetic env: query '" + query_id + "' needs >= 2 responses");
    }
    for (const ResponseOutcome& o : it->second) {
      if (o.quality_score < 1 || o.quality_score > 5) {
        raise(ErrorKind::kInvalidArgument,
              "synthetic env: quality score out of range for '" + query_id + "'");
      }
    }
  }
}

double SyntheticEnv::response_reward(const std::string& query_id,
                                     int response) const {
  const auto& table = outcomes.at(query_id);
  const ResponseOutcome& o = table.at(static_cast<std::size_t>(response));
  return weights.lambda_eva * (o.safe ? 1.0 : -1.0) +
         weights.lambda_qual * rewards::quality_reward(o.quality_score);
}

int SyntheticEnv::best_response(const std::string& query_id) const {
  const auto& table = outcomes.at(query_id);
  int best = 0;
  double best_reward = response_reward(query_id, 0);
  for (int a = 1; a < static_cast<int>(table.size()); ++a) {
    const double r = response_reward(query_id, a);
    if (r > best_reward) {
      best_reward = r;
      best = a;
    }
  }
  return best;
}

namespace {

int modal_response(const VectorXd& logits) {
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

TrainingResult simulate_training(const SyntheticEnv& env,
                                 const GrpoConfig& config) {
  env.validate();
  config.validate();

  ToyPolicy policy;
  for (const std::string& query_id : env.query_ids) {
    const auto k = static_cast<Eigen::Index>(env.outcomes.at(query_id).size());
    policy.logits[query_id] = VectorXd::Zero(k);
    policy.reference_logits[query_id] = VectorXd::Zero(k);
  }

  TrainingResult result;
  result.trace.reserve(static_cast<std::size_t>(config.iterations));
  for (int iteration = 0; iteration < config.iterations; ++iteration) {
    std::vector<GroupRollout> rollouts;
    rollouts.reserve(env.query_ids.size());
    for (std::size_t qi = 0; qi < env.query_ids.size(); ++qi) {
      const std::string& query_id = env.query_ids[qi];
      const VectorXd probs = softmax(policy.logits[query_id]);
      std::vector<double> probvec(probs.data(), probs.data() + probs.size());

      GroupRollout rollout;
      rollout.query_id = query_id;
      std::vector<double> group_rewards;
      group_rewards.reserve(static_cast<std::size_t>(config.group_size));
      for (int slot = 0; slot < config.group_size; ++slot) {
        auto draw = rng::KeyedRng::keyed(config.seed,
                                         static_cast<std::uint64_t>(iteration),
                                         static_cast<std::uint64_t>(qi),
                                         static_cast<std::uint64_t>(slot));
        const int a = static_cast<int>(draw.categorical(probvec));
        const ResponseOutcome& o = env.outcomes.at(query_id)[static_cast<std::size_t>(a)];
        gateway::Verdict verdict;
        verdict.label = o.safe ? gateway::Label::SAFE : gateway::Label::TOXIC;
        verdict.detector_id = env.f_adv_id;
        const rewards::RewardBreakdown breakdown = rewards::combined_reward(
            rewards::evasion_reward(verdict, env.f_adv_id),
            rewards::quality_reward(o.quality_score), env.weights);
        rollout.responses.push_back(a);
        rollout.rewards.push_back(breakdown);
        group_rewards.push_back(breakdown.total);
      }
      rollout.advantages =
          normalize_advantages(group_rewards, config.advantage_epsilon);
      rollouts.push_back(std::move(rollout));
    }

    policy = grpo_step(policy, rollouts, config);

    TraceRow row;
    row.iteration = iteration + 1;
    double expected = 0.0;
    double kl = 0.0;
    for (const std::string& query_id : env.query_ids) {
      const VectorXd probs = softmax(policy.logits[query_id]);
      const VectorXd ref_probs = softmax(policy.reference_logits[query_id]);
      double q_expected = 0.0;
      for (int a = 0; a < static_cast<int>(probs.size()); ++a) {
        q_expected += probs[a] * env.response_reward(query_id, a);
      }
      expected += q_expected;
      kl += kl_divergence(probs, ref_probs);
      row.modal_responses[query_id] = modal_response(policy.logits[query_id]);
    }
    const double n = static_cast<double>(env.query_ids.size());
    row.expected_reward = expected / n;
    row.kl_to_reference = kl / n;
    result.trace.push_back(std::move(row));
  }
  result.final_policy = std::move(policy);
  return result;
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace) {
  out << "iteration,expected_reward,kl_to_reference,modal_responses\n";
  char buf[64];
  for (const TraceRow& row : trace) {
    out << row.iteration << ',';
    std::snprintf(buf, sizeof buf, "%.17g", row.expected_reward);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", row.kl_to_reference);
    out << buf << ',';
    bool first = true;
    for (const auto& [query_id, action] : row.modal_responses) {
      if (!first) out << ';';
      out << query_id << '=' << action;
      first = false;
    }
    out << '\n';
  }
}

}  // namespace toxred::grpo
