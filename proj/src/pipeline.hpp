#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "toy_tasks.hpp"

namespace cst {

// File-based stages behind the CLI and the C API. Every stage returns an
// exit status (0 ok, 1 error, 2 partial) instead of throwing; diagnostics go
// to the log sink.
enum class ExitStatus { ok = 0, error = 1, partial = 2 };

enum class LogLevel { info, warning, error };
using LogSink = std::function<void(LogLevel, const std::string&)>;

enum class AugmentMode { cst, dpo_only };
AugmentMode parse_augment_mode(const std::string& name);
const char* to_string(AugmentMode mode);

// Relative inputs are looked up under data_dir first, then out_dir.
std::filesystem::path resolve_input(const RunConfig& cfg, const std::filesystem::path& p);
// Relative outputs land under out_dir; parent directories are created.
std::filesystem::path resolve_output(const RunConfig& cfg, const std::filesystem::path& p);

// Appended to artifacts of a stage that did not complete.
inline constexpr const char* kPartialSuffix = ".partial";

struct ToyPromptsOptions {
  Task task = Task::safety;
  std::filesystem::path train_out;
  std::filesystem::path test_out;
};

struct SynthOptions {
  Task task = Task::safety;
  std::filesystem::path prompts;
  std::filesystem::path out;
  bool remote = false;
  bool allow_partial = false;
};

struct AugmentOptions {
  Task task = Task::safety;
  AugmentMode mode = AugmentMode::cst;
  std::filesystem::path in;
  std::filesystem::path out;
};

struct MixOptions {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out;
};

struct PretrainOptions {
  std::vector<std::filesystem::path> pairs;
  std::filesystem::path out;
};

struct TrainOptions {
  std::filesystem::path data;
  std::optional<std::filesystem::path> init;  // none: random init
  std::filesystem::path out_dir;
};

struct EvalOptions {
  std::filesystem::path model;
  std::optional<std::filesystem::path> safety_prompts;
  std::optional<std::filesystem::path> persona_prompts;
  std::string name;
  std::filesystem::path out_dir;
  bool remote = false;
};

struct ReportOptions {
  std::vector<std::filesystem::path> scores;
  std::filesystem::path out_dir;
};

class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg, LogSink log = {});

  const RunConfig& config() const noexcept { return cfg_; }

  // Seeded train/test split of the built-in toy prompt bank.
  ExitStatus toy_prompts(const ToyPromptsOptions& opts);
  // One raw pair per prompt line (toy generator unless remote).
  ExitStatus synth(const SynthOptions& opts);
  // Raw pairs -> validated tuples under the task's system prompts.
  ExitStatus augment(const AugmentOptions& opts);
  // Concatenate tuple files and shuffle with the run seed.
  ExitStatus mix(const MixOptions& opts);
  // Maximum-likelihood warm-up of a fresh model on raw pairs.
  ExitStatus pretrain(const PretrainOptions& opts);
  // DPO against a frozen copy of the initial model; writes checkpoints,
  // metrics.csv and model.json.
  ExitStatus train(const TrainOptions& opts);
  // Greedy generations judged per system prompt; writes verdicts.jsonl and
  // score.json.
  ExitStatus eval(const EvalOptions& opts);
  // report.md and report.csv over a list of score.json files.
  ExitStatus report(const ReportOptions& opts);

 private:
  void log(LogLevel level, const std::string& msg) const;
  template <class Fn>
  ExitStatus guarded(const char* stage, Fn&& fn);

  RunConfig cfg_;
  LogSink log_;
};

}  // namespace cst
