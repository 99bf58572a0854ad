// Command-line front end. Links only the C API.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cst/cst.h"

namespace {

struct Globals {
  std::string config;
  std::string out_dir;
  std::string data_dir;
  std::uint64_t seed = 0;
  bool quiet = false;
};

void log_to_stderr(cst_log_level level, const char* message, void* user) {
  const bool quiet = *static_cast<const bool*>(user);
  if (quiet && level == CST_LOG_INFO) return;
  const char* tag = level == CST_LOG_ERROR ? "error: " : level == CST_LOG_WARNING ? "warning: " : "";
  std::fprintf(stderr, "%s%s\n", tag, message);
}

int report_failure(cst_status status) {
  if (status != CST_OK && status != CST_PARTIAL && status != CST_ERR_STAGE_FAILED) {
    std::fprintf(stderr, "error: %s\n", cst_last_error());
  }
  return cst_exit_code(status);
}

// Owns the config and pipeline handles for one invocation.
class Session {
 public:
  ~Session() {
    cst_pipeline_free(pipeline_);
    cst_config_free(config_);
  }

  cst_status open(const Globals& g, bool seed_given, bool* quiet) {
    auto st = g.config.empty() ? cst_config_default(&config_) : cst_config_load(g.config.c_str(), &config_);
    if (st != CST_OK) return st;
    if (seed_given && (st = cst_config_set_seed(config_, g.seed)) != CST_OK) return st;
    if (!g.out_dir.empty() && (st = cst_config_set_out_dir(config_, g.out_dir.c_str())) != CST_OK) return st;
    if (!g.data_dir.empty() && (st = cst_config_set_data_dir(config_, g.data_dir.c_str())) != CST_OK) return st;
    return cst_pipeline_new(config_, log_to_stderr, quiet, &pipeline_);
  }

  cst_pipeline* pipeline() const { return pipeline_; }
  const cst_config* config() const { return config_; }

 private:
  cst_config* config_ = nullptr;
  cst_pipeline* pipeline_ = nullptr;
};

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Configurable safety tuning: synthesize, augment, train, evaluate, report"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cst_version()));

  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Run seed (overrides train.seed)");
  app.add_option("--config", g.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--out-dir", g.out_dir, "Output directory (overrides paths.out_dir)");
  app.add_option("--data-dir", g.data_dir, "Input directory (overrides paths.data_dir)");
  app.add_flag("-q,--quiet", g.quiet, "Only print warnings and errors");

  const std::vector<std::string> tasks{"safety", "persona"};
  const std::vector<std::string> modes{"cst", "dpo-only"};

  std::string task = "safety", mode = "cst", in, out, prompts, train_out, test_out, data, init, model;
  std::string safety_prompts, persona_prompts, name, stage_out_dir = ".";
  std::vector<std::string> inputs;
  bool remote = false, allow_partial = false;

  auto* toy = app.add_subcommand("toy-prompts", "Write the seeded train/test split of the toy prompt bank");
  toy->add_option("--task", task, "safety or persona")->check(CLI::IsMember(tasks));
  toy->add_option("--train-out", train_out, "Train prompts file")->required();
  toy->add_option("--test-out", test_out, "Test prompts file")->required();

  auto* synth = app.add_subcommand("synth", "Synthesize preference pairs by self-critique");
  synth->add_option("--prompts", prompts, "One prompt per line")->required();
  synth->add_option("--out", out, "Pairs JSONL")->required();
  synth->add_option("--task", task, "safety or persona")->check(CLI::IsMember(tasks));
  synth->add_flag("--remote", remote, "Use the remote generator from the config");
  synth->add_flag("--allow-partial", allow_partial, "Write successful pairs and exit 2 on failures");

  auto* augment = app.add_subcommand("augment", "Turn pairs into preference tuples");
  augment->add_option("--in", in, "Pairs JSONL")->required();
  augment->add_option("--out", out, "Tuples JSONL")->required();
  augment->add_option("--mode", mode, "cst or dpo-only")->check(CLI::IsMember(modes));
  augment->add_option("--task", task, "safety or persona")->check(CLI::IsMember(tasks));

  auto* mix = app.add_subcommand("mix", "Concatenate tuple files and shuffle with the run seed");
  mix->add_option("--in", inputs, "Tuples JSONL (repeatable)")->required();
  mix->add_option("--out", out, "Tuples JSONL")->required();

  auto* pretrain = app.add_subcommand("pretrain", "Fit the base model on raw pairs");
  pretrain->add_option("--pairs", inputs, "Pairs JSONL (repeatable)")->required();
  pretrain->add_option("--out", out, "Checkpoint JSON")->required();

  auto* train = app.add_subcommand("train", "DPO training against a frozen copy of the initial model");
  train->add_option("--data", data, "Tuples JSONL")->required();
  train->add_option("--init", init, "Initial checkpoint (default: random init)");
  train->add_option("--run-dir", stage_out_dir, "Run directory under the output directory");

  auto* eval = app.add_subcommand("eval", "Generate under each system prompt and judge");
  eval->add_option("--model", model, "Checkpoint JSON")->required();
  eval->add_option("--safety-prompts", safety_prompts, "Safety test prompts");
  eval->add_option("--persona-prompts", persona_prompts, "Persona test prompts");
  eval->add_option("--name", name, "Model name in the report");
  eval->add_option("--run-dir", stage_out_dir, "Run directory under the output directory");
  eval->add_flag("--remote", remote, "Use the remote judge from the config");

  auto* report = app.add_subcommand("report", "Render score files as markdown and CSV tables");
  report->add_option("--scores", inputs, "score.json (repeatable)")->required();
  report->add_option("--run-dir", stage_out_dir, "Run directory under the output directory");

  auto* show = app.add_subcommand("config", "Print the effective configuration");

  CLI11_PARSE(app, argc, argv);

  Session session;
  if (auto st = session.open(g, seed_opt->count() > 0, &g.quiet); st != CST_OK) return report_failure(st);
  cst_pipeline* p = session.pipeline();

  cst_status st = CST_OK;
  if (*toy) {
    st = cst_toy_prompts(p, task.c_str(), train_out.c_str(), test_out.c_str());
  } else if (*synth) {
    st = cst_synth(p, task.c_str(), prompts.c_str(), out.c_str(), remote, allow_partial);
  } else if (*augment) {
    st = cst_augment(p, task.c_str(), mode.c_str(), in.c_str(), out.c_str());
  } else if (*mix) {
    auto v = c_strings(inputs);
    st = cst_mix(p, v.data(), v.size(), out.c_str());
  } else if (*pretrain) {
    auto v = c_strings(inputs);
    st = cst_pretrain(p, v.data(), v.size(), out.c_str());
  } else if (*train) {
    st = cst_train(p, data.c_str(), or_null(init), stage_out_dir.c_str());
  } else if (*eval) {
    if (safety_prompts.empty() && persona_prompts.empty()) {
      std::fprintf(stderr, "error: eval needs --safety-prompts and/or --persona-prompts\n");
      return 1;
    }
    st = cst_eval(p, model.c_str(), or_null(safety_prompts), or_null(persona_prompts), or_null(name),
                  stage_out_dir.c_str(), remote);
  } else if (*report) {
    auto v = c_strings(inputs);
    st = cst_report(p, v.data(), v.size(), stage_out_dir.c_str());
  } else if (*show) {
    char* text = nullptr;
    st = cst_config_to_json(session.config(), &text);
    if (st == CST_OK) std::fputs(text, stdout);
    cst_string_free(text);
  }
  return report_failure(st);
}
