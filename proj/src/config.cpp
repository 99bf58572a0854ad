#include "config.hpp"

#include <functional>
#include <map>

#include "error.hpp"
#include "json.hpp"

namespace cst {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

SystemPromptPair RunConfig::safety_prompts() const {
  return {prompts.s0, prompts.s1, {"S0", "S1"}};
}

SystemPromptPair RunConfig::persona_prompts() const {
  return {prompts.s_rp, prompts.s_a, {"S_RP", "S_A"}};
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_argument, msg); };
  if (model.context < 1 || model.embed < 1 || model.hidden < 1) fail("model.K, model.E, model.H must be >= 1");
  train.validate();
  pretrain.validate();
  validate_system_prompts(safety_prompts());
  validate_system_prompts(persona_prompts());
  templates.validate();
  if (eval.max_len < 1) fail("eval.max_len must be >= 1");
  if (!(eval.train_fraction > 0 && eval.train_fraction < 1)) fail("eval.train_fraction must be in (0, 1)");
  if (remote.timeout_seconds <= 0) fail("remote.timeout must be > 0");
  if (remote.retries < 0) fail("remote.retries must be >= 0");
  if (remote.backoff_seconds < 0) fail("remote.backoff must be >= 0");
  if (remote.max_inflight < 1) fail("remote.max_inflight must be >= 1");
}

namespace {

using Setter = std::function<void(const json&, const std::string&)>;

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::invalid_argument, "config key '" + key + "': " + what);
}

Setter string_field(std::string& dst) {
  return [&dst](const json& v, const std::string& key) {
    if (!v.is_string()) bad(key, "expected a string");
    dst = v.get<std::string>();
  };
}

Setter path_field(std::filesystem::path& dst) {
  return [&dst](const json& v, const std::string& key) {
    if (!v.is_string()) bad(key, "expected a string");
    dst = v.get<std::string>();
  };
}

Setter real_field(double& dst) {
  return [&dst](const json& v, const std::string& key) {
    if (!v.is_number()) bad(key, "expected a number");
    dst = v.get<double>();
  };
}

template <class Int>
Setter int_field(Int& dst) {
  return [&dst](const json& v, const std::string& key) {
    if (!v.is_number_integer()) bad(key, "expected an integer");
    if (v.is_number_unsigned()) {
      dst = static_cast<Int>(v.get<std::uint64_t>());
    } else {
      const auto x = v.get<std::int64_t>();
      if constexpr (std::is_unsigned_v<Int>) {
        if (x < 0) bad(key, "expected a non-negative integer");
      }
      dst = static_cast<Int>(x);
    }
  };
}

void apply_section(const json& doc, const std::string& name,
                   const std::map<std::string, Setter>& fields) {
  auto it = doc.find(name);
  if (it == doc.end()) return;
  if (!it->is_object()) bad(name, "expected an object");
  for (const auto& [key, value] : it->items()) {
    const auto full = name + "." + key;
    auto f = fields.find(key);
    if (f == fields.end()) throw Error(ErrorCode::invalid_argument, "unknown config key '" + full + "'");
    f->second(value, full);
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("malformed config JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::parse, "config must be a JSON object");

  static const char* const kSections[] = {"model", "dpo", "train", "pretrain", "prompts",
                                          "templates", "eval", "paths", "remote"};
  for (const auto& [key, _] : doc.items()) {
    bool known = false;
    for (const char* s : kSections) known = known || key == s;
    if (!known) throw Error(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
  }

  RunConfig cfg;
  apply_section(doc, "model", {{"K", int_field(cfg.model.context)},
                               {"E", int_field(cfg.model.embed)},
                               {"H", int_field(cfg.model.hidden)}});
  apply_section(doc, "dpo", {{"beta", real_field(cfg.train.dpo.beta)},
                             {"chosen_nll_weight", real_field(cfg.train.dpo.chosen_nll_weight)}});

  std::string optimizer = to_string(cfg.train.optimizer);
  apply_section(doc, "train", {{"lr", real_field(cfg.train.learning_rate)},
                               {"epochs", int_field(cfg.train.epochs)},
                               {"batch", int_field(cfg.train.batch_size)},
                               {"seed", int_field(cfg.train.seed)},
                               {"optimizer", string_field(optimizer)},
                               {"adam_beta1", real_field(cfg.train.adam_beta1)},
                               {"adam_beta2", real_field(cfg.train.adam_beta2)},
                               {"adam_epsilon", real_field(cfg.train.adam_epsilon)},
                               {"checkpoint_every", int_field(cfg.train.checkpoint_every)}});
  cfg.train.optimizer = parse_optimizer(optimizer);

  apply_section(doc, "pretrain", {{"epochs", int_field(cfg.pretrain.epochs)},
                                  {"lr", real_field(cfg.pretrain.learning_rate)},
                                  {"batch", int_field(cfg.pretrain.batch_size)},
                                  {"system", string_field(cfg.pretrain.system)},
                                  {"init_scale", real_field(cfg.pretrain.init_scale)}});
  apply_section(doc, "prompts", {{"s0", string_field(cfg.prompts.s0)},
                                 {"s1", string_field(cfg.prompts.s1)},
                                 {"s_rp", string_field(cfg.prompts.s_rp)},
                                 {"s_a", string_field(cfg.prompts.s_a)}});
  apply_section(doc, "templates", {{"critic_system", string_field(cfg.templates.critic_system)},
                                   {"critic", string_field(cfg.templates.critic)},
                                   {"reviser", string_field(cfg.templates.reviser)}});
  apply_section(doc, "eval", {{"max_len", int_field(cfg.eval.max_len)},
                              {"train_fraction", real_field(cfg.eval.train_fraction)}});
  apply_section(doc, "paths", {{"data_dir", path_field(cfg.paths.data_dir)},
                               {"out_dir", path_field(cfg.paths.out_dir)}});
  apply_section(doc, "remote", {{"generator_url", string_field(cfg.remote.generator_url)},
                                {"judge_url", string_field(cfg.remote.judge_url)},
                                {"timeout", real_field(cfg.remote.timeout_seconds)},
                                {"retries", int_field(cfg.remote.retries)},
                                {"backoff", real_field(cfg.remote.backoff_seconds)},
                                {"max_inflight", int_field(cfg.remote.max_inflight)},
                                {"judge_template", string_field(cfg.remote.judge_template)}});
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return parse_run_config(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string run_config_json(const RunConfig& cfg) {
  ojson doc;
  doc["model"] = {{"K", cfg.model.context}, {"E", cfg.model.embed}, {"H", cfg.model.hidden}};
  doc["dpo"] = {{"beta", cfg.train.dpo.beta}, {"chosen_nll_weight", cfg.train.dpo.chosen_nll_weight}};
  doc["train"] = {{"lr", cfg.train.learning_rate},
                  {"epochs", cfg.train.epochs},
                  {"batch", cfg.train.batch_size},
                  {"seed", cfg.train.seed},
                  {"optimizer", to_string(cfg.train.optimizer)},
                  {"adam_beta1", cfg.train.adam_beta1},
                  {"adam_beta2", cfg.train.adam_beta2},
                  {"adam_epsilon", cfg.train.adam_epsilon},
                  {"checkpoint_every", cfg.train.checkpoint_every}};
  doc["pretrain"] = {{"epochs", cfg.pretrain.epochs},
                     {"lr", cfg.pretrain.learning_rate},
                     {"batch", cfg.pretrain.batch_size},
                     {"system", cfg.pretrain.system},
                     {"init_scale", cfg.pretrain.init_scale}};
  doc["prompts"] = {{"s0", cfg.prompts.s0},
                    {"s1", cfg.prompts.s1},
                    {"s_rp", cfg.prompts.s_rp},
                    {"s_a", cfg.prompts.s_a}};
  doc["templates"] = {{"critic_system", cfg.templates.critic_system},
                      {"critic", cfg.templates.critic},
                      {"reviser", cfg.templates.reviser}};
  doc["eval"] = {{"max_len", cfg.eval.max_len}, {"train_fraction", cfg.eval.train_fraction}};
  doc["paths"] = {{"data_dir", cfg.paths.data_dir.string()}, {"out_dir", cfg.paths.out_dir.string()}};
  doc["remote"] = {{"generator_url", cfg.remote.generator_url},
                   {"judge_url", cfg.remote.judge_url},
                   {"timeout", cfg.remote.timeout_seconds},
                   {"retries", cfg.remote.retries},
                   {"backoff", cfg.remote.backoff_seconds},
                   {"max_inflight", cfg.remote.max_inflight},
                   {"judge_template", cfg.remote.judge_template}};
  return doc.dump(2) + "\n";
}

}  // namespace cst
