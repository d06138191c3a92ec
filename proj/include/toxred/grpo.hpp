// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "toxred/rewards.hpp"

namespace toxred::grpo {

using Eigen::VectorXd;

// Logits per query over that query's K candidate responses.
using PolicyLogits = std::map<std::string, VectorXd>;

// Categorical policy over a finite response set, plus the frozen reference
// policy it is regularized toward.
struct ToyPolicy {
  PolicyLogits logits;
  PolicyLogits reference_logits;

  void validate() const;
};

// G scored responses for one query.
struct GroupRollout {
  std::string query_id;
  std::vector<int> responses;                        // sampled indices
  std::vector<rewards::RewardBreakdown> rewards;     // one per response
  std::vector<double> advantages;                    // group-normalized
};

struct GrpoConfig {
  int group_size = 8;
  double clip_epsilon = 0.2;       // may be +infinity to disable clipping
  double kl_coefficient = 0.05;
  double advantage_epsilon = 1e-8;
  double learning_rate = 0.2;
  int iterations = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

VectorXd softmax(const VectorXd& logits);

// (r_i - mean) / (std + eps) with the population standard deviation.
// A zero-variance group yields all-zero advantages.
std::vector<double> normalize_advantages(std::span<const double> group_rewards,
                                         double eps);

// min(ratio * A, clamp(ratio, 1 - eps, 1 + eps) * A)
double clipped_surrogate(double ratio, double advantage, double clip_epsilon);

// sum p * ln(p / q) with 0 * ln 0 = 0; q_i = 0 with p_i > 0 is an error.
double kl_divergence(const VectorXd& policy_probs,
                     const VectorXd& reference_probs);

// Mean over groups of (mean clipped surrogate - beta * KL to reference),
// with probability ratios taken against the fixed old policy. This is the
// function the analytic gradient and the finite-difference oracle share.
double grpo_objective(const PolicyLogits& theta, const PolicyLogits& old_logits,
                      const PolicyLogits& reference_logits,
                      std::span<const GroupRollout> rollouts,
                      const GrpoConfig& config);

// Analytic gradient of grpo_objective with respect to theta.
PolicyLogits grpo_gradient(const PolicyLogits& theta,
                           const PolicyLogits& old_logits,
                           const PolicyLogits& reference_logits,
                           std::span<const GroupRollout> rollouts,
                           const GrpoConfig& config);

// One ascent step on the objective; the old policy is the policy passed in,
// and reference logits are unchanged.
ToyPolicy grpo_step(const ToyPolicy& policy,
                    std::span<const GroupRollout> rollouts,
                    const GrpoConfig& config);

// Deterministic per-response outcomes standing in for the adversarial
// detector and the quality judge.
struct ResponseOutcome {
  bool safe = false;
  int quality_score = 1;
};

struct SyntheticEnv {
  // Insertion order of queries fixes the (query, slot) RNG keying.
  std::vector<std::string> query_ids;
  std::map<std::string, std::vector<ResponseOutcome>> outcomes;
  rewards::RewardWeights weights;
  std::string f_adv_id = "f_adv_synth";

  void validate() const;
  double response_reward(const std::string& query_id, int response) const;
  // Exhaustive argmax of the per-response reward table.
  int best_response(const std::string& query_id) const;
};

struct TraceRow {
  int iteration = 0;
  double expected_reward = 0.0;
  double kl_to_reference = 0.0;
  std::map<std::string, int> modal_responses;
};

struct TrainingResult {
  std::vector<TraceRow> trace;
  ToyPolicy final_policy;
};

// Samples G responses per query per iteration with a counter-based RNG keyed
// by (seed, iteration, query index, slot), scores them from the env tables,
// and applies one grpo_step per iteration.
TrainingResult simulate_training(const SyntheticEnv& env,
                                 const GrpoConfig& config);

// CSV columns: iteration, expected_reward, kl_to_reference, modal_responses
// (query=response pairs joined with ';').
void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace);

}  // namespace toxred::grpo
