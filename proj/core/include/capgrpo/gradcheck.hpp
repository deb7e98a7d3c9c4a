// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference check of objective_gradient on random rollout
// batches drawn from the default environment.

#ifndef CAPGRPO_GRADCHECK_HPP_
#define CAPGRPO_GRADCHECK_HPP_

#include <cstdint>
#include <vector>

#include "capgrpo/grpo.hpp"

namespace capgrpo {

struct GradCheckCase {
  int hidden_dim = 0;
  RatioLevel ratio_level = RatioLevel::kPerToken;
  double beta_hat = 0.04;
  bool clip_active = false;  // old policy far from theta, so ratios leave the band
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  GradCheckCase config;
  double relative_error = 0.0;  // ||fd - analytic|| / max(||fd||, ||analytic||)
  double clip_fraction = 0.0;
  double objective = 0.0;
  int coordinates = 0;
};

// Cycles through {0, 0.04} x {token, sequence} x {clip off, on} x {linear,
// hidden layer} until `trials` cases exist.
std::vector<GradCheckCase> gradcheck_cases(int trials, std::uint64_t seed);

GradCheckResult run_gradcheck(const GradCheckCase& c, double step = 1e-5,
                              int coordinates = 200);

}  // namespace capgrpo

#endif  // CAPGRPO_GRADCHECK_HPP_
