#include "dpo.hpp"

#include <cmath>

#include "error.hpp"

namespace cst {

LogProbQuad swap_roles(const LogProbQuad& q) {
  return {q.theta_rejected, q.ref_rejected, q.theta_chosen, q.ref_chosen};
}

double preference_logit(const LogProbQuad& q, const DPOConfig& cfg) {
  return cfg.beta * ((q.theta_chosen - q.ref_chosen) - (q.theta_rejected - q.ref_rejected));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double neg_log_sigmoid(double z) {
  // softplus(-z) = max(-z, 0) + log1p(exp(-|z|))
  return std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double preference_prob(const LogProbQuad& q, const DPOConfig& cfg) {
  return sigmoid(preference_logit(q, cfg));
}

LogProbQuad tuple_logprobs(const TinyLM& model, const ReferenceModel& ref, const CSTTuple& t) {
  return {seq_logprob(model, t.system, t.prompt, t.chosen),
          seq_logprob(ref, t.system, t.prompt, t.chosen),
          seq_logprob(model, t.system, t.prompt, t.rejected),
          seq_logprob(ref, t.system, t.prompt, t.rejected)};
}

double dpo_loss(const TinyLM& model, const ReferenceModel& ref, std::span<const CSTTuple> dataset,
                const DPOConfig& cfg) {
  if (dataset.empty()) throw Error(ErrorCode::invalid_argument, "empty dataset");
  double total = 0.0;
  for (const auto& t : dataset) {
    const auto q = tuple_logprobs(model, ref, t);
    total += neg_log_sigmoid(preference_logit(q, cfg)) - cfg.chosen_nll_weight * q.theta_chosen;
  }
  return total / static_cast<double>(dataset.size());
}

double dpo_loss(const TinyLM& model, const ReferenceModel& ref, const Dataset& dataset,
                const DPOConfig& cfg) {
  return dpo_loss(model, ref, std::span<const CSTTuple>(dataset.tuples()), cfg);
}

LossAndGrad dpo_loss_and_grad(const TinyLM& model, const ReferenceModel& ref,
                              std::span<const CSTTuple> dataset, const DPOConfig& cfg) {
  if (dataset.empty()) throw Error(ErrorCode::invalid_argument, "empty dataset");
  const auto& vocab = model.vocab();
  const double inv_n = 1.0 / static_cast<double>(dataset.size());
  LossAndGrad out;
  out.grad.assign(model.layout().total(), 0.0);
  std::vector<double> g_chosen(out.grad.size());
  std::vector<double> g_rejected(out.grad.size());
  // Tuples are reduced in index order so results are bit-reproducible.
  for (const auto& t : dataset) {
    const auto chosen = render_context(vocab, t.system, t.prompt, t.chosen);
    const auto rejected = render_context(vocab, t.system, t.prompt, t.rejected);
    std::fill(g_chosen.begin(), g_chosen.end(), 0.0);
    std::fill(g_rejected.begin(), g_rejected.end(), 0.0);
    LogProbQuad q;
    q.theta_chosen = seq_logprob_accumulate(model, chosen, 1.0, g_chosen);
    q.theta_rejected = seq_logprob_accumulate(model, rejected, 1.0, g_rejected);
    q.ref_chosen = seq_logprob(ref.model(), chosen);
    q.ref_rejected = seq_logprob(ref.model(), rejected);
    const double z = preference_logit(q, cfg);
    out.loss += neg_log_sigmoid(z) - cfg.chosen_nll_weight * q.theta_chosen;
    // d/dz softplus(-z) = -(1 - sigmoid(z)) = -sigmoid(-z)
    const double coeff = -sigmoid(-z) * cfg.beta * inv_n;
    const double anchor = -cfg.chosen_nll_weight * inv_n;
    for (std::size_t i = 0; i < out.grad.size(); ++i) {
      out.grad[i] += coeff * (g_chosen[i] - g_rejected[i]) + anchor * g_chosen[i];
    }
  }
  out.loss *= inv_n;
  return out;
}

std::vector<double> dpo_loss_grad(const TinyLM& model, const ReferenceModel& ref,
                                  const Dataset& dataset, const DPOConfig& cfg) {
  return dpo_loss_and_grad(model, ref, std::span<const CSTTuple>(dataset.tuples()), cfg).grad;
}

}  // namespace cst
