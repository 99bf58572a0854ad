#pragma once

#include <span>
#include <vector>

#include "data.hpp"
#include "model.hpp"

namespace cst {

struct DPOConfig {
  double beta = 0.1;
  // Optional anchor: adds weight * -log pi_theta(chosen | s, x) per tuple. Zero
  // gives the pure preference objective.
  double chosen_nll_weight = 0.0;
};

// Sequence log-probabilities (nats) of the chosen and rejected answers under
// the policy and the frozen reference.
struct LogProbQuad {
  double theta_chosen = 0.0;
  double ref_chosen = 0.0;
  double theta_rejected = 0.0;
  double ref_rejected = 0.0;
};

LogProbQuad swap_roles(const LogProbQuad& q);

// beta * [(theta_chosen - ref_chosen) - (theta_rejected - ref_rejected)]
double preference_logit(const LogProbQuad& q, const DPOConfig& cfg);
double preference_prob(const LogProbQuad& q, const DPOConfig& cfg);

double sigmoid(double z);
// -log(sigmoid(z)) evaluated as softplus(-z).
double neg_log_sigmoid(double z);

// Both policies are conditioned on the tuple's system prompt.
LogProbQuad tuple_logprobs(const TinyLM& model, const ReferenceModel& ref, const CSTTuple& tuple);

double dpo_loss(const TinyLM& model, const ReferenceModel& ref, std::span<const CSTTuple> dataset,
                const DPOConfig& cfg);
double dpo_loss(const TinyLM& model, const ReferenceModel& ref, const Dataset& dataset,
                const DPOConfig& cfg);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean loss and its exact gradient w.r.t. the policy parameters:
//   grad = mean_i  -(1 - p_i) * beta * (d lp_theta_chosen - d lp_theta_rejected)
//                  - chosen_nll_weight * d lp_theta_chosen
LossAndGrad dpo_loss_and_grad(const TinyLM& model, const ReferenceModel& ref,
                              std::span<const CSTTuple> dataset, const DPOConfig& cfg);

std::vector<double> dpo_loss_grad(const TinyLM& model, const ReferenceModel& ref,
                                  const Dataset& dataset, const DPOConfig& cfg);

}  // namespace cst
