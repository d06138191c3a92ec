// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "toxred/rewards.hpp"

using namespace toxred;
using gateway::Label;
using gateway::Verdict;

namespace {

Verdict verdict_from(const std::string& detector_id, Label label) {
  Verdict v;
  v.detector_id = detector_id;
  v.label = label;
  return v;
}

}  // namespace

TEST_CASE("evasion reward maps safe/toxic to +1/-1") {
  CHECK(rewards::evasion_reward(verdict_from("f_adv", Label::SAFE), "f_adv") == 1.0);
  CHECK(rewards::evasion_reward(verdict_from("f_adv", Label::TOXIC), "f_adv") == -1.0);
}

TEST_CASE("evasion reward rejects verdicts from other detectors") {
  CHECK_THROWS_AS(
      rewards::evasion_reward(verdict_from("eval_detector", Label::SAFE), "f_adv"),
      Error);
}

TEST_CASE("quality reward is the exact rational mapping") {
  CHECK(rewards::quality_reward(1) == 0.0);
  CHECK(rewards::quality_reward(3) == 0.5);
  CHECK(rewards::quality_reward(5) == 1.0);
  CHECK_THROWS_AS(rewards::quality_reward(0), Error);
  CHECK_THROWS_AS(rewards::quality_reward(6), Error);
}

TEST_CASE("quality reward image is exactly the five grid points") {
  std::set<double> image;
  for (int score = 1; score <= 5; ++score) {
    image.insert(rewards::quality_reward(score));
  }
  CHECK(image == std::set<double>{0.0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("combined reward with default weights") {
  const rewards::RewardWeights weights;
  CHECK(rewards::combined_reward(1.0, 1.0, weights).total == 1.0);
  CHECK(rewards::combined_reward(-1.0, 0.0, weights).total == -0.5);
}

TEST_CASE("evasion-ablated weights recover the quality-only signal") {
  const rewards::RewardWeights weights{.lambda_eva = 0.0, .lambda_qual = 0.5};
  for (int score = 1; score <= 5; ++score) {
    const double q = rewards::quality_reward(score);
    CHECK(rewards::combined_reward(1.0, q, weights).total == 0.5 * q);
    CHECK(rewards::combined_reward(-1.0, q, weights).total == 0.5 * q);
  }
}

TEST_CASE("invalid weights and inputs are rejected") {
  CHECK_THROWS_AS(rewards::combined_reward(
                      1.0, 0.5, rewards::RewardWeights{.lambda_eva = 0.0,
                                                       .lambda_qual = 0.0}),
                  Error);
  CHECK_THROWS_AS(rewards::combined_reward(
                      1.0, 0.5, rewards::RewardWeights{.lambda_eva = -0.1,
                                                       .lambda_qual = 0.5}),
                  Error);
  const rewards::RewardWeights weights;
  CHECK_THROWS_AS(rewards::combined_reward(0.5, 0.5, weights), Error);
  CHECK_THROWS_AS(rewards::combined_reward(1.0, 1.5, weights), Error);
}

TEST_CASE("total is monotone in quality score and strictly so when weighted") {
  const rewards::RewardWeights weights;
  double previous = -10.0;
  for (int score = 1; score <= 5; ++score) {
    const double total =
        rewards::combined_reward(1.0, rewards::quality_reward(score), weights).total;
    CHECK(total > previous);
    previous = total;
  }
  // With lambda_qual = 0 the total is flat in the score.
  const rewards::RewardWeights eva_only{.lambda_eva = 0.5, .lambda_qual = 0.0};
  for (int score = 1; score <= 5; ++score) {
    CHECK(rewards::combined_reward(1.0, rewards::quality_reward(score), eva_only)
              .total == 0.5);
  }
}

TEST_CASE("flipping the verdict moves the total by exactly 2 lambda_eva") {
  for (const rewards::RewardWeights weights :
       {rewards::RewardWeights{},
        rewards::RewardWeights{.lambda_eva = 0.25, .lambda_qual = 0.75}}) {
    for (int score = 1; score <= 5; ++score) {
      const double q = rewards::quality_reward(score);
      const double safe_total = rewards::combined_reward(1.0, q, weights).total;
      const double toxic_total = rewards::combined_reward(-1.0, q, weights).total;
      CHECK(safe_total - toxic_total == 2.0 * weights.lambda_eva);
    }
  }
}

TEST_CASE("verdict-based combined reward carries the exact judge score") {
  const rewards::RewardWeights weights;
  gateway::QualityScore score{.score = 4, .raw = "{}"};
  const rewards::RewardBreakdown breakdown = rewards::combined_reward(
      verdict_from("f_adv", Label::TOXIC), "f_adv", score, weights);
  CHECK(breakdown.evasion == -1.0);
  CHECK(breakdown.quality_score == 4);
  CHECK(breakdown.quality == 0.75);
  CHECK(breakdown.total == -0.5 * 1.0 + 0.5 * 0.75);
}
