#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "dpo.hpp"
#include "error.hpp"
#include "model.hpp"

namespace cst {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer(const std::string& name);
const char* to_string(OptimizerKind kind);

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 30;
  int batch_size = 8;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  DPOConfig dpo;
  // File-based trainer only: write a checkpoint every N epochs (0: final only).
  int checkpoint_every = 1;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

// Bias-corrected Adam:
//   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
//   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               const TrainConfig& cfg);

void sgd_step(std::span<double> params, std::span<const double> grad, const TrainConfig& cfg);

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double seconds = 0.0;  // wall time since training started
};

struct TrainReport {
  std::vector<double> epoch_losses;
  std::vector<EpochMetrics> metrics;
  TinyLM final_model;
  double seconds = 0.0;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, int batch, TinyLM last_finite)
      : Error(ErrorCode::divergence,
              "divergence at epoch " + std::to_string(epoch) + " batch " + std::to_string(batch)),
        epoch_(epoch), batch_(batch), last_finite_(std::move(last_finite)) {}

  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }
  const TinyLM& last_finite() const noexcept { return last_finite_; }

 private:
  int epoch_;
  int batch_;
  TinyLM last_finite_;
};

using EpochCallback = std::function<void(const EpochMetrics&, const TinyLM&)>;

// Tuples whose chosen and rejected answers render identically under the
// model vocabulary carry no training signal; returns their indices.
std::vector<std::size_t> indistinguishable_tuples(const Vocabulary& vocab, const Dataset& dataset);

// Mini-batch DPO against a reference snapshot taken on entry. The epoch
// order is a seeded shuffle (seed + epoch); each epoch's mean loss is the
// tuple-weighted mean of the pre-step batch losses.
TrainReport train(TinyLM model, const Dataset& dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Same, with an explicit reference (used when the policy should start from
// a different point than the anchor).
TrainReport train(TinyLM model, const ReferenceModel& reference, const Dataset& dataset,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Maximum-likelihood warm-up that turns a random init into the base model,
// i.e. the frozen reference of every later preference run.
struct PretrainConfig {
  int epochs = 20;
  double learning_rate = 1e-2;
  int batch_size = 8;
  std::string system = "You are an AI assistant";
  double init_scale = 0.05;

  void validate() const;
};

struct SftExample {
  std::string system;
  std::string prompt;
  std::string answer;
};

// One example per pair under `system`, answering with either the original
// or the revision; the choice is a fair coin from Lcg64(seed), drawn in pair
// order. The base model thus has no systematic preference between the two
// behaviors.
std::vector<SftExample> warmup_examples(std::span<const PreferencePair> pairs,
                                        const std::string& system, std::uint64_t seed);

// Adam on the mean negative log-likelihood of the answers, batches drawn
// from a seeded shuffle (seed + epoch). Reported losses are nats per example.
TrainReport pretrain(TinyLM model, std::span<const SftExample> examples, const PretrainConfig& cfg,
                     std::uint64_t seed, const EpochCallback& on_epoch = {});

}  // namespace cst
