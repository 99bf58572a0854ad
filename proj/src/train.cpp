#include "train.hpp"

#include <chrono>
#include <cmath>
#include <algorithm>
#include <numeric>

namespace cst {

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw Error(ErrorCode::invalid_argument, "unknown optimizer '" + name + "' (expected sgd or adam)");
}

const char* to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "learning_rate must be > 0");
  if (epochs < 0) throw Error(ErrorCode::invalid_argument, "epochs must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
  if (!(dpo.beta > 0.0)) throw Error(ErrorCode::invalid_argument, "beta must be > 0");
  if (!(dpo.chosen_nll_weight >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "chosen_nll_weight must be >= 0");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw Error(ErrorCode::invalid_argument, "adam epsilon must be > 0");
  if (checkpoint_every < 0) throw Error(ErrorCode::invalid_argument, "checkpoint_every must be >= 0");
}

void PretrainConfig::validate() const {
  if (epochs < 0) throw Error(ErrorCode::invalid_argument, "pretrain epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "pretrain learning_rate must be > 0");
  if (batch_size < 1) throw Error(ErrorCode::invalid_argument, "pretrain batch_size must be >= 1");
  if (!(init_scale >= 0.0)) throw Error(ErrorCode::invalid_argument, "pretrain init_scale must be >= 0");
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               const TrainConfig& cfg) {
  if (params.size() != grad.size()) {
    throw Error(ErrorCode::invalid_argument, "adam_step: parameter/gradient size mismatch");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorCode::invalid_argument, "adam_step: state size mismatch");
  }
  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
  }
}

void sgd_step(std::span<double> params, std::span<const double> grad, const TrainConfig& cfg) {
  if (params.size() != grad.size()) {
    throw Error(ErrorCode::invalid_argument, "sgd_step: parameter/gradient size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
}

std::vector<std::size_t> indistinguishable_tuples(const Vocabulary& vocab, const Dataset& dataset) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& t = dataset[i];
    if (render_context(vocab, t.system, t.prompt, t.chosen).tokens ==
        render_context(vocab, t.system, t.prompt, t.rejected).tokens) {
      out.push_back(i);
    }
  }
  return out;
}

namespace {

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

TrainReport train(TinyLM model, const Dataset& dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  const auto reference = snapshot_reference(model);
  return train(std::move(model), reference, dataset, cfg, on_epoch);
}

TrainReport train(TinyLM model, const ReferenceModel& reference, const Dataset& dataset,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorCode::invalid_argument, "empty dataset");
  if (!(reference.model().vocab() == model.vocab()) || !(reference.model().arch() == model.arch())) {
    throw Error(ErrorCode::invalid_argument, "reference and policy shapes differ");
  }
  if (auto bad = indistinguishable_tuples(model.vocab(), dataset); !bad.empty()) {
    throw Error(ErrorCode::validation,
                "tuple " + std::to_string(bad.front()) +
                    ": chosen and rejected are indistinguishable under the model vocabulary");
  }

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  TrainReport report{{}, {}, model, 0.0};
  AdamState adam;
  std::vector<std::size_t> order(dataset.size());
  std::vector<CSTTuple> batch;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    seeded_shuffle(order, cfg.seed + static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size, ++batch_index) {
      const auto end = std::min(order.size(), begin + batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(dataset[order[i]]);
      auto lg = dpo_loss_and_grad(model, reference, batch, cfg.dpo);
      if (!std::isfinite(lg.loss) || !all_finite(lg.grad)) {
        throw DivergenceError(epoch, batch_index, model);
      }
      loss_sum += lg.loss * static_cast<double>(batch.size());
      std::vector<double> before(model.params().begin(), model.params().end());
      auto params = model.mutable_params();
      if (cfg.optimizer == OptimizerKind::adam) {
        adam_step(params, lg.grad, adam, cfg);
      } else {
        sgd_step(params, lg.grad, cfg);
      }
      if (!all_finite(model.params())) {
        model.set_params(std::move(before));
        throw DivergenceError(epoch, batch_index, model);
      }
    }
    EpochMetrics m{epoch, loss_sum / static_cast<double>(dataset.size()), elapsed()};
    report.epoch_losses.push_back(m.mean_loss);
    report.metrics.push_back(m);
    if (on_epoch) on_epoch(m, model);
  }
  report.final_model = std::move(model);
  report.seconds = elapsed();
  return report;
}

std::vector<SftExample> warmup_examples(std::span<const PreferencePair> pairs,
                                        const std::string& system, std::uint64_t seed) {
  Lcg64 coin(seed);
  std::vector<SftExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({system, p.prompt, coin.below(2) == 1 ? p.original : p.revised});
  }
  return out;
}

TrainReport pretrain(TinyLM model, std::span<const SftExample> examples, const PretrainConfig& cfg,
                     std::uint64_t seed, const EpochCallback& on_epoch) {
  cfg.validate();
  if (examples.empty() && cfg.epochs > 0) throw Error(ErrorCode::invalid_argument, "no warm-up examples");

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  std::vector<RenderedSequence> rendered;
  rendered.reserve(examples.size());
  for (const auto& ex : examples) rendered.push_back(render_context(model.vocab(), ex.system, ex.prompt, ex.answer));

  TrainConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  AdamState adam;
  TrainReport report{{}, {}, model, 0.0};
  std::vector<std::size_t> order(rendered.size());
  std::vector<double> grad(model.layout().total());
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    seeded_shuffle(order, seed + static_cast<std::uint64_t>(epoch));
    double nll_sum = 0.0;
    int batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size, ++batch_index) {
      const auto end = std::min(order.size(), begin + batch_size);
      const double n = static_cast<double>(end - begin);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = begin; i < end; ++i) {
        nll_sum -= seq_logprob_accumulate(model, rendered[order[i]], -1.0 / n, grad);
      }
      if (!std::isfinite(nll_sum) || !all_finite(grad)) throw DivergenceError(epoch, batch_index, model);
      std::vector<double> before(model.params().begin(), model.params().end());
      adam_step(model.mutable_params(), grad, adam, adam_cfg);
      if (!all_finite(model.params())) {
        model.set_params(std::move(before));
        throw DivergenceError(epoch, batch_index, model);
      }
    }
    EpochMetrics m{epoch, nll_sum / static_cast<double>(rendered.size()), elapsed()};
    report.epoch_losses.push_back(m.mean_loss);
    report.metrics.push_back(m);
    if (on_epoch) on_epoch(m, model);
  }
  report.final_model = std::move(model);
  report.seconds = elapsed();
  return report;
}

}  // namespace cst
