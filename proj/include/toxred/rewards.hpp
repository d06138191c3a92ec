// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "toxred/errors.hpp"
#include "toxred/verdict.hpp"

namespace toxred::rewards {

// Relative weighting of the evasion and quality terms. Both ablations
// (zeroing either term) are expressible; both zero is not.
struct RewardWeights {
  double lambda_eva = 0.5;
  double lambda_qual = 0.5;

  void validate() const {
    if (lambda_eva < 0.0 || lambda_qual < 0.0 ||
        lambda_eva + lambda_qual <= 0.0) {
      raise(ErrorKind::kConfig,
            "reward weights must be non-negative with a positive sum");
    }
  }
};

// Per-response reward decomposition. All reachable values lie on an exact
// binary grid (quality is a multiple of 1/4), so tests compare exactly.
struct RewardBreakdown {
  double evasion = 0.0;     // in {-1, +1}
  int quality_score = 1;    // in 1..5
  double quality = 0.0;     // (quality_score - 1) / 4
  double total = 0.0;       // lambda_eva * evasion + lambda_qual * quality
};

// +1 when the training-time adversarial detector is evaded, -1 otherwise.
// The verdict must come from the configured adversarial detector; final-ASR
// detectors and the independent judge are separate roles.
inline double evasion_reward(const gateway::Verdict& verdict,
                             std::string_view f_adv_id) {
  if (verdict.detector_id != f_adv_id) {
    raise(ErrorKind::kConfig,
          "evasion_reward: verdict from '" + verdict.detector_id +
              "' but the adversarial detector is '" + std::string(f_adv_id) +
              "'");
  }
  return verdict.label == gateway::Label::SAFE ? 1.0 : -1.0;
}

// Maps the 1..5 judge score onto [0, 1]: 1 is the base value, each of the
// four rubric dimensions adds 1/4.
inline double quality_reward(int score) {
  if (score < 1 || score > 5) {
    raise(ErrorKind::kInvalidArgument,
          "quality_reward: score " + std::to_string(score) + " not in 1..5");
  }
  return static_cast<double>(score - 1) / 4.0;
}

inline double quality_reward(const gateway::QualityScore& score) {
  return quality_reward(score.score);
}

inline RewardBreakdown combined_reward(double evasion, double quality,
                                       const RewardWeights& weights) {
  weights.validate();
  if (evasion != 1.0 && evasion != -1.0) {
    raise(ErrorKind::kInvalidArgument, "combined_reward: evasion not in {-1, +1}");
  }
  if (quality < 0.0 || quality > 1.0) {
    raise(ErrorKind::kInvalidArgument, "combined_reward: quality not in [0, 1]");
  }
  RewardBreakdown out;
  out.evasion = evasion;
  out.quality = quality;
  out.quality_score = static_cast<int>(quality * 4.0) + 1;
  out.total = weights.lambda_eva * evasion + weights.lambda_qual * quality;
  return out;
}

inline RewardBreakdown combined_reward(const gateway::Verdict& verdict,
                                       std::string_view f_adv_id,
                                       const gateway::QualityScore& score,
                                       const RewardWeights& weights) {
  RewardBreakdown out =
      combined_reward(evasion_reward(verdict, f_adv_id),
                      quality_reward(score), weights);
  out.quality_score = score.score;
  return out;
}

}  // namespace toxred::rewards
