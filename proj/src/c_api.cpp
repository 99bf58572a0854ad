#include "cst/cst.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "dpo.hpp"
#include "error.hpp"
#include "pipeline.hpp"

struct cst_config {
  cst::RunConfig cfg;
};

struct cst_pipeline {
  cst::Pipeline pipeline;
};

struct cst_model {
  cst::TinyLM model;
};

struct cst_reference {
  cst::ReferenceModel reference;
};

struct cst_dataset {
  cst::Dataset dataset;
};

namespace {

thread_local std::string g_last_error;

cst_status status_of(cst::ErrorCode code) {
  switch (code) {
    case cst::ErrorCode::invalid_argument: return CST_ERR_INVALID_ARGUMENT;
    case cst::ErrorCode::io: return CST_ERR_IO;
    case cst::ErrorCode::parse: return CST_ERR_PARSE;
    case cst::ErrorCode::validation: return CST_ERR_VALIDATION;
    case cst::ErrorCode::divergence: return CST_ERR_DIVERGENCE;
    case cst::ErrorCode::transport: return CST_ERR_TRANSPORT;
    case cst::ErrorCode::partial: return CST_PARTIAL;
    case cst::ErrorCode::internal: return CST_ERR_INTERNAL;
  }
  return CST_ERR_INTERNAL;
}

cst_status fail(cst_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs fn, translating exceptions into status codes.
template <class Fn>
cst_status guard(Fn&& fn) noexcept {
  try {
    return fn();
  } catch (const cst::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(CST_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CST_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CST_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) throw cst::Error(cst::ErrorCode::invalid_argument, std::string(name) + " is NULL");
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::filesystem::path> paths(const char* const* items, size_t n) {
  if (n > 0) require(items, "path list");
  std::vector<std::filesystem::path> out;
  for (size_t i = 0; i < n; ++i) {
    require(items[i], "path list entry");
    out.emplace_back(items[i]);
  }
  return out;
}

cst_status stage_status(cst::ExitStatus s) {
  switch (s) {
    case cst::ExitStatus::ok: return CST_OK;
    case cst::ExitStatus::partial: return CST_PARTIAL;
    case cst::ExitStatus::error: break;
  }
  if (g_last_error.empty()) g_last_error = "pipeline stage failed";
  return CST_ERR_STAGE_FAILED;
}

}  // namespace

extern "C" {

const char* cst_version(void) { return "0.1.0"; }

const char* cst_last_error(void) { return g_last_error.c_str(); }

const char* cst_status_name(cst_status status) {
  switch (status) {
    case CST_OK: return "ok";
    case CST_PARTIAL: return "partial";
    case CST_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CST_ERR_IO: return "i/o error";
    case CST_ERR_PARSE: return "parse error";
    case CST_ERR_VALIDATION: return "validation error";
    case CST_ERR_DIVERGENCE: return "divergence";
    case CST_ERR_TRANSPORT: return "transport error";
    case CST_ERR_INTERNAL: return "internal error";
    case CST_ERR_STAGE_FAILED: return "stage failed";
  }
  return "unknown status";
}

int cst_exit_code(cst_status status) {
  if (status == CST_OK) return 0;
  if (status == CST_PARTIAL) return 2;
  return 1;
}

void cst_string_free(char* s) { std::free(s); }

// --- config ---------------------------------------------------------------

cst_status cst_config_default(cst_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new cst_config{};
    return CST_OK;
  });
}

cst_status cst_config_parse(const char* json, cst_config** out) {
  return guard([&] {
    require(json, "json");
    require(out, "out");
    *out = new cst_config{cst::parse_run_config(json)};
    return CST_OK;
  });
}

cst_status cst_config_load(const char* path, cst_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cst_config{cst::load_run_config(path)};
    return CST_OK;
  });
}

cst_status cst_config_to_json(const cst_config* cfg, char** out) {
  return guard([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup_string(cst::run_config_json(cfg->cfg));
    return CST_OK;
  });
}

cst_status cst_config_set_seed(cst_config* cfg, uint64_t seed) {
  return guard([&] {
    require(cfg, "cfg");
    cfg->cfg.train.seed = seed;
    return CST_OK;
  });
}

cst_status cst_config_set_out_dir(cst_config* cfg, const char* path) {
  return guard([&] {
    require(cfg, "cfg");
    require(path, "path");
    cfg->cfg.paths.out_dir = path;
    return CST_OK;
  });
}

cst_status cst_config_set_data_dir(cst_config* cfg, const char* path) {
  return guard([&] {
    require(cfg, "cfg");
    require(path, "path");
    cfg->cfg.paths.data_dir = path;
    return CST_OK;
  });
}

void cst_config_free(cst_config* cfg) { delete cfg; }

// --- pipeline -------------------------------------------------------------

cst_status cst_pipeline_new(const cst_config* cfg, cst_log_fn log, void* user, cst_pipeline** out) {
  return guard([&] {
    require(cfg, "cfg");
    require(out, "out");
    cst::LogSink sink = [log, user](cst::LogLevel level, const std::string& msg) {
      if (level == cst::LogLevel::error) g_last_error = msg;
      if (log != nullptr) log(static_cast<cst_log_level>(level), msg.c_str(), user);
    };
    *out = new cst_pipeline{cst::Pipeline(cfg->cfg, std::move(sink))};
    return CST_OK;
  });
}

void cst_pipeline_free(cst_pipeline* p) { delete p; }

cst_status cst_toy_prompts(cst_pipeline* p, const char* task, const char* train_out, const char* test_out) {
  return guard([&] {
    require(p, "pipeline");
    require(task, "task");
    require(train_out, "train_out");
    require(test_out, "test_out");
    return stage_status(p->pipeline.toy_prompts({cst::parse_task(task), train_out, test_out}));
  });
}

cst_status cst_synth(cst_pipeline* p, const char* task, const char* prompts, const char* out, int remote,
                     int allow_partial) {
  return guard([&] {
    require(p, "pipeline");
    require(task, "task");
    require(prompts, "prompts");
    require(out, "out");
    return stage_status(
        p->pipeline.synth({cst::parse_task(task), prompts, out, remote != 0, allow_partial != 0}));
  });
}

cst_status cst_augment(cst_pipeline* p, const char* task, const char* mode, const char* in, const char* out) {
  return guard([&] {
    require(p, "pipeline");
    require(task, "task");
    require(mode, "mode");
    require(in, "in");
    require(out, "out");
    return stage_status(
        p->pipeline.augment({cst::parse_task(task), cst::parse_augment_mode(mode), in, out}));
  });
}

cst_status cst_mix(cst_pipeline* p, const char* const* inputs, size_t n_inputs, const char* out) {
  return guard([&] {
    require(p, "pipeline");
    require(out, "out");
    return stage_status(p->pipeline.mix({paths(inputs, n_inputs), out}));
  });
}

cst_status cst_pretrain(cst_pipeline* p, const char* const* pair_files, size_t n_files, const char* out) {
  return guard([&] {
    require(p, "pipeline");
    require(out, "out");
    return stage_status(p->pipeline.pretrain({paths(pair_files, n_files), out}));
  });
}

cst_status cst_train(cst_pipeline* p, const char* data, const char* init, const char* out_dir) {
  return guard([&] {
    require(p, "pipeline");
    require(data, "data");
    require(out_dir, "out_dir");
    cst::TrainOptions opts;
    opts.data = data;
    if (init != nullptr) opts.init = init;
    opts.out_dir = out_dir;
    return stage_status(p->pipeline.train(opts));
  });
}

cst_status cst_eval(cst_pipeline* p, const char* model, const char* safety_prompts,
                    const char* persona_prompts, const char* name, const char* out_dir, int remote) {
  return guard([&] {
    require(p, "pipeline");
    require(model, "model");
    require(out_dir, "out_dir");
    cst::EvalOptions opts;
    opts.model = model;
    if (safety_prompts != nullptr) opts.safety_prompts = safety_prompts;
    if (persona_prompts != nullptr) opts.persona_prompts = persona_prompts;
    if (name != nullptr) opts.name = name;
    opts.out_dir = out_dir;
    opts.remote = remote != 0;
    return stage_status(p->pipeline.eval(opts));
  });
}

cst_status cst_report(cst_pipeline* p, const char* const* score_files, size_t n_files, const char* out_dir) {
  return guard([&] {
    require(p, "pipeline");
    require(out_dir, "out_dir");
    return stage_status(p->pipeline.report({paths(score_files, n_files), out_dir}));
  });
}

// --- models ---------------------------------------------------------------

cst_status cst_model_load(const char* path, cst_model** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cst_model{cst::load_checkpoint(path)};
    return CST_OK;
  });
}

cst_status cst_model_save(const cst_model* m, const char* path) {
  return guard([&] {
    require(m, "model");
    require(path, "path");
    cst::save_checkpoint(m->model, path);
    return CST_OK;
  });
}

void cst_model_free(cst_model* m) { delete m; }

size_t cst_model_vocab_size(const cst_model* m) { return m == nullptr ? 0 : m->model.vocab_size(); }

size_t cst_model_param_count(const cst_model* m) { return m == nullptr ? 0 : m->model.params().size(); }

cst_status cst_model_seq_logprob(const cst_model* m, const char* system, const char* prompt,
                                 const char* answer, double* out) {
  return guard([&] {
    require(m, "model");
    require(system, "system");
    require(prompt, "prompt");
    require(answer, "answer");
    require(out, "out");
    *out = cst::seq_logprob(m->model, system, prompt, answer);
    return CST_OK;
  });
}

cst_status cst_model_generate(const cst_model* m, const char* system, const char* prompt, int max_len,
                              char** out) {
  return guard([&] {
    require(m, "model");
    require(system, "system");
    require(prompt, "prompt");
    require(out, "out");
    *out = dup_string(cst::greedy_generate(m->model, system, prompt, max_len));
    return CST_OK;
  });
}

cst_status cst_model_snapshot(const cst_model* m, cst_reference** out) {
  return guard([&] {
    require(m, "model");
    require(out, "out");
    *out = new cst_reference{cst::snapshot_reference(m->model)};
    return CST_OK;
  });
}

void cst_reference_free(cst_reference* r) { delete r; }

cst_status cst_reference_seq_logprob(const cst_reference* r, const char* system, const char* prompt,
                                     const char* answer, double* out) {
  return guard([&] {
    require(r, "reference");
    require(system, "system");
    require(prompt, "prompt");
    require(answer, "answer");
    require(out, "out");
    *out = cst::seq_logprob(r->reference, system, prompt, answer);
    return CST_OK;
  });
}

// --- datasets -------------------------------------------------------------

cst_status cst_dataset_load(const char* path, cst_dataset** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cst_dataset{cst::load_jsonl(path)};
    return CST_OK;
  });
}

cst_status cst_dataset_save(const cst_dataset* d, const char* path) {
  return guard([&] {
    require(d, "dataset");
    require(path, "path");
    cst::save_jsonl(d->dataset, path);
    return CST_OK;
  });
}

size_t cst_dataset_size(const cst_dataset* d) { return d == nullptr ? 0 : d->dataset.size(); }

void cst_dataset_free(cst_dataset* d) { delete d; }

cst_status cst_dpo_loss(const cst_model* policy, const cst_reference* reference, const cst_dataset* data,
                        double beta, double* out) {
  return guard([&] {
    require(policy, "policy");
    require(reference, "reference");
    require(data, "dataset");
    require(out, "out");
    cst::DPOConfig cfg;
    cfg.beta = beta;
    if (!(beta > 0.0)) throw cst::Error(cst::ErrorCode::invalid_argument, "beta must be > 0");
    *out = cst::dpo_loss(policy->model, reference->reference, data->dataset, cfg);
    return CST_OK;
  });
}

}  // extern "C"
