#include "pipeline.hpp"

#include <cstdio>
#include <memory>
#include <sstream>

#include "checkpoint.hpp"
#include "critique.hpp"
#include "error.hpp"
#include "eval.hpp"

namespace fs = std::filesystem;

namespace cst {

AugmentMode parse_augment_mode(const std::string& name) {
  if (name == "cst") return AugmentMode::cst;
  if (name == "dpo-only") return AugmentMode::dpo_only;
  throw Error(ErrorCode::invalid_argument, "unknown augment mode '" + name + "' (expected cst or dpo-only)");
}

const char* to_string(AugmentMode mode) {
  return mode == AugmentMode::cst ? "cst" : "dpo-only";
}

fs::path resolve_input(const RunConfig& cfg, const fs::path& p) {
  if (p.empty()) throw Error(ErrorCode::invalid_argument, "empty input path");
  if (p.is_absolute()) return p;
  auto in_data = cfg.paths.data_dir / p;
  if (fs::exists(in_data)) return in_data;
  auto in_out = cfg.paths.out_dir / p;
  if (fs::exists(in_out)) return in_out;
  return in_data;
}

fs::path resolve_output(const RunConfig& cfg, const fs::path& p) {
  if (p.empty()) throw Error(ErrorCode::invalid_argument, "empty output path");
  auto out = p.is_absolute() ? p : cfg.paths.out_dir / p;
  if (out.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out.parent_path(), ec);
    if (ec) throw Error(ErrorCode::io, "cannot create " + out.parent_path().string() + ": " + ec.message());
  }
  return out;
}

namespace {

fs::path existing_input(const RunConfig& cfg, const fs::path& p) {
  auto path = resolve_input(cfg, p);
  if (!fs::exists(path)) throw Error(ErrorCode::io, "no such file: " + path.string());
  return path;
}

fs::path partial_path(const fs::path& p) {
  return fs::path(p.string() + kPartialSuffix);
}

// Stale partial artifacts from an earlier failed run would otherwise survive
// a successful rerun.
void remove_partial(const fs::path& p) {
  std::error_code ec;
  fs::remove(partial_path(p), ec);
}

SystemPromptPair prompts_for(const RunConfig& cfg, Task task) {
  return task == Task::safety ? cfg.safety_prompts() : cfg.persona_prompts();
}

HttpEndpointConfig endpoint(const RunConfig& cfg, const std::string& url, const char* token_env) {
  if (url.empty()) throw Error(ErrorCode::invalid_argument, "remote endpoint not configured");
  HttpEndpointConfig e;
  e.url = url;
  e.timeout_seconds = cfg.remote.timeout_seconds;
  e.retries = cfg.remote.retries;
  e.backoff_seconds = cfg.remote.backoff_seconds;
  e.bearer_token = env_or_empty(token_env);
  return e;
}

std::vector<std::string> vocab_corpus(const RunConfig& cfg) {
  return {cfg.prompts.s0, cfg.prompts.s1, cfg.prompts.s_rp, cfg.prompts.s_a, cfg.pretrain.system};
}

// Wall time is the only nondeterministic column of a training run.
std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::string out = "epoch,mean_loss,seconds\n";
  for (const auto& m : metrics) {
    char secs[32];
    std::snprintf(secs, sizeof(secs), "%.3f", m.seconds);
    out += std::to_string(m.epoch) + "," + format_double17(m.mean_loss) + "," + secs + "\n";
  }
  return out;
}

std::string checkpoint_name(int epoch) { return "ckpt_" + std::to_string(epoch) + ".json"; }

}  // namespace

Pipeline::Pipeline(RunConfig cfg, LogSink log) : cfg_(std::move(cfg)), log_(std::move(log)) {
  cfg_.validate();
}

void Pipeline::log(LogLevel level, const std::string& msg) const {
  if (log_) log_(level, msg);
}

template <class Fn>
ExitStatus Pipeline::guarded(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    log(LogLevel::error, std::string(stage) + ": " + e.what());
    return ExitStatus::error;
  }
}

ExitStatus Pipeline::toy_prompts(const ToyPromptsOptions& opts) {
  return guarded("toy-prompts", [&] {
    auto split = split_prompts(toy_prompt_bank(opts.task), cfg_.eval.train_fraction, cfg_.train.seed);
    auto join = [](const std::vector<std::string>& lines) {
      std::string out;
      for (const auto& l : lines) out += l + "\n";
      return out;
    };
    write_text_file(resolve_output(cfg_, opts.train_out), join(split.train));
    write_text_file(resolve_output(cfg_, opts.test_out), join(split.test));
    log(LogLevel::info, std::string("toy-prompts: ") + to_string(opts.task) + " " +
                            std::to_string(split.train.size()) + " train / " +
                            std::to_string(split.test.size()) + " test");
    return ExitStatus::ok;
  });
}

ExitStatus Pipeline::synth(const SynthOptions& opts) {
  return guarded("synth", [&] {
    const auto prompts = read_lines(existing_input(cfg_, opts.prompts));
    const auto sp = prompts_for(cfg_, opts.task);
    std::unique_ptr<Generator> gen;
    if (opts.remote) {
      gen = std::make_unique<RemoteGenerator>(
          endpoint(cfg_, cfg_.remote.generator_url, "CST_GENERATOR_TOKEN"));
    } else {
      gen = std::make_unique<ToyGenerator>(cfg_.train.seed, sp, toy_task(opts.task));
    }
    auto result = synthesize_dataset(*gen, prompts, sp, cfg_.templates, to_string(opts.task),
                                     /*allow_partial=*/true);
    for (const auto& f : result.failures) {
      log(LogLevel::error, "synth: prompt " + std::to_string(f.index) + " (" + to_string(f.stage) +
                               "): " + f.message);
    }
    const auto out = resolve_output(cfg_, opts.out);
    if (!result.failures.empty() && !opts.allow_partial) {
      save_pairs_jsonl(result.pairs, partial_path(out));
      log(LogLevel::error, "synth: " + std::to_string(result.failures.size()) + " of " +
                               std::to_string(prompts.size()) + " prompts failed; kept " +
                               partial_path(out).string());
      return ExitStatus::error;
    }
    save_pairs_jsonl(result.pairs, out);
    remove_partial(out);
    log(LogLevel::info, "synth: wrote " + std::to_string(result.pairs.size()) + " pairs to " + out.string());
    return result.failures.empty() ? ExitStatus::ok : ExitStatus::partial;
  });
}

ExitStatus Pipeline::augment(const AugmentOptions& opts) {
  return guarded("augment", [&] {
    const auto pairs = load_pairs_jsonl(existing_input(cfg_, opts.in));
    const auto sp = prompts_for(cfg_, opts.task);
    const auto dataset = opts.mode == AugmentMode::cst ? cst_augment(pairs, sp) : dpo_only_view(pairs, sp);
    if (auto violations = validate(dataset); !violations.empty()) {
      for (const auto& v : violations) log(LogLevel::error, "augment: " + v.message);
      return ExitStatus::error;
    }
    const auto out = resolve_output(cfg_, opts.out);
    save_jsonl(dataset, out);
    log(LogLevel::info, std::string("augment: ") + to_string(opts.mode) + " " +
                            std::to_string(pairs.size()) + " pairs -> " +
                            std::to_string(dataset.size()) + " tuples");
    return ExitStatus::ok;
  });
}

ExitStatus Pipeline::mix(const MixOptions& opts) {
  return guarded("mix", [&] {
    if (opts.inputs.empty()) throw Error(ErrorCode::invalid_argument, "no input datasets");
    // Same order as mix_datasets for two inputs: concatenate, then shuffle once.
    std::vector<CSTTuple> joined;
    for (const auto& in : opts.inputs) {
      const auto d = load_jsonl(existing_input(cfg_, in));
      joined.insert(joined.end(), d.begin(), d.end());
    }
    seeded_shuffle(joined, cfg_.train.seed);
    const Dataset mixed(std::move(joined));
    if (auto violations = validate(mixed); !violations.empty()) {
      for (const auto& v : violations) log(LogLevel::error, "mix: " + v.message);
      return ExitStatus::error;
    }
    save_jsonl(mixed, resolve_output(cfg_, opts.out));
    log(LogLevel::info, "mix: " + std::to_string(mixed.size()) + " tuples");
    return ExitStatus::ok;
  });
}

ExitStatus Pipeline::pretrain(const PretrainOptions& opts) {
  return guarded("pretrain", [&] {
    if (opts.pairs.empty()) throw Error(ErrorCode::invalid_argument, "no pair files");
    std::vector<PreferencePair> pairs;
    for (const auto& p : opts.pairs) {
      auto more = load_pairs_jsonl(existing_input(cfg_, p));
      pairs.insert(pairs.end(), more.begin(), more.end());
    }
    auto corpus = vocab_corpus(cfg_);
    for (const auto& p : pairs) {
      corpus.push_back(p.prompt);
      corpus.push_back(p.original);
      corpus.push_back(p.revised);
    }
    auto model = TinyLM::random(build_vocab(corpus), cfg_.model, cfg_.train.seed, cfg_.pretrain.init_scale);
    const auto examples = warmup_examples(pairs, cfg_.pretrain.system, cfg_.train.seed);
    const auto out = resolve_output(cfg_, opts.out);
    try {
      auto rep = cst::pretrain(std::move(model), examples, cfg_.pretrain, cfg_.train.seed);
      save_checkpoint(rep.final_model, out);
      remove_partial(out);
      log(LogLevel::info, "pretrain: " + std::to_string(examples.size()) + " examples, V=" +
                              std::to_string(rep.final_model.vocab_size()) + ", final nll " +
                              (rep.epoch_losses.empty() ? std::string("n/a")
                                                        : format_double17(rep.epoch_losses.back())));
    } catch (const DivergenceError& e) {
      save_checkpoint(e.last_finite(), partial_path(out));
      throw;
    }
    return ExitStatus::ok;
  });
}

ExitStatus Pipeline::train(const TrainOptions& opts) {
  return guarded("train", [&] {
    const auto dataset = load_jsonl(existing_input(cfg_, opts.data));
    if (auto violations = validate(dataset); !violations.empty()) {
      for (const auto& v : violations) log(LogLevel::error, "train: " + v.message);
      return ExitStatus::error;
    }
    auto initial = [&] {
      if (opts.init) return load_checkpoint(existing_input(cfg_, *opts.init));
      auto corpus = vocab_corpus(cfg_);
      for (const auto& t : dataset) corpus.insert(corpus.end(), {t.system, t.prompt, t.chosen, t.rejected});
      log(LogLevel::warning, "train: no --init model; starting from a random init");
      return TinyLM::random(build_vocab(corpus), cfg_.model, cfg_.train.seed, cfg_.pretrain.init_scale);
    };
    auto model = initial();
    const auto dir = resolve_output(cfg_, opts.out_dir / "model.json").parent_path();
    const auto every = cfg_.train.checkpoint_every;
    std::vector<EpochMetrics> seen;
    auto on_epoch = [&](const EpochMetrics& m, const TinyLM& current) {
      seen.push_back(m);
      if (every > 0 && m.epoch % every == 0) save_checkpoint(current, dir / checkpoint_name(m.epoch));
      write_text_file(dir / "metrics.csv", metrics_csv(seen));
      log(LogLevel::info, "train: epoch " + std::to_string(m.epoch) + " loss " + format_double17(m.mean_loss));
    };
    write_text_file(dir / "metrics.csv", metrics_csv(seen));
    try {
      auto rep = cst::train(std::move(model), dataset, cfg_.train, on_epoch);
      save_checkpoint(rep.final_model, dir / "model.json");
      remove_partial(dir / "model.json");
    } catch (const DivergenceError& e) {
      save_checkpoint(e.last_finite(), partial_path(dir / "model.json"));
      throw;
    }
    return ExitStatus::ok;
  });
}

ExitStatus Pipeline::eval(const EvalOptions& opts) {
  return guarded("eval", [&] {
    if (!opts.safety_prompts && !opts.persona_prompts) {
      throw Error(ErrorCode::invalid_argument, "no test prompts (need safety and/or persona prompts)");
    }
    const auto model = load_checkpoint(existing_input(cfg_, opts.model));
    std::unique_ptr<Judge> judge;
    if (opts.remote) {
      judge = std::make_unique<RemoteJudge>(endpoint(cfg_, cfg_.remote.judge_url, "CST_JUDGE_TOKEN"),
                                            cfg_.remote.judge_template,
                                            static_cast<std::size_t>(cfg_.remote.max_inflight));
    } else {
      judge = std::make_unique<RuleJudge>();
    }
    const auto name = opts.name.empty() ? opts.model.stem().string() : opts.name;
    ScoreReport report;
    report.model = name;
    auto run = [&](const fs::path& prompts_file, Task task) {
      const auto prompts = read_lines(existing_input(cfg_, prompts_file));
      report.merge(score_model(model, prompts, prompts_for(cfg_, task), *judge, cfg_.eval.max_len, name));
    };
    if (opts.safety_prompts) run(*opts.safety_prompts, Task::safety);
    if (opts.persona_prompts) run(*opts.persona_prompts, Task::persona);

    const auto dir = resolve_output(cfg_, opts.out_dir / "score.json").parent_path();
    const auto excluded = report.excluded();
    if (excluded > 0) {
      for (const auto& ex : report.examples) {
        if (!ex.verdict) log(LogLevel::error, "eval: judge failed on '" + ex.prompt + "' (" + ex.label + "): " + ex.error);
      }
      write_text_file(partial_path(dir / "verdicts.jsonl"), verdicts_jsonl(report));
      write_text_file(partial_path(dir / "score.json"), score_report_json(report));
      log(LogLevel::error, "eval: " + std::to_string(excluded) + " examples excluded; kept .partial artifacts");
      return ExitStatus::partial;
    }
    write_text_file(dir / "verdicts.jsonl", verdicts_jsonl(report));
    write_text_file(dir / "score.json", score_report_json(report));
    remove_partial(dir / "verdicts.jsonl");
    remove_partial(dir / "score.json");
    std::string summary = "eval: " + name;
    for (const auto& [label, s] : report.labels) summary += " " + label + "=" + format_double17(s.mean());
    log(LogLevel::info, summary);
    return ExitStatus::ok;
  });
}

ExitStatus Pipeline::report(const ReportOptions& opts) {
  return guarded("report", [&] {
    std::vector<ScoreReport> reports;
    for (const auto& p : opts.scores) reports.push_back(parse_score_report(read_text_file(existing_input(cfg_, p))));
    const auto rendered = render_report(reports);
    const auto dir = resolve_output(cfg_, opts.out_dir / "report.md").parent_path();
    write_text_file(dir / "report.md", rendered.markdown);
    write_text_file(dir / "report.csv", rendered.csv);
    log(LogLevel::info, "report:\n" + rendered.markdown);
    return ExitStatus::ok;
  });
}

}  // namespace cst
