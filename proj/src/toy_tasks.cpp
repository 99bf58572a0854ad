#include "toy_tasks.hpp"

#include <cmath>

#include "error.hpp"

namespace cst {

Task parse_task(const std::string& name) {
  if (name == "safety") return Task::safety;
  if (name == "persona") return Task::persona;
  throw Error(ErrorCode::invalid_argument, "unknown task '" + name + "' (expected safety or persona)");
}

const char* to_string(Task task) { return task == Task::safety ? "safety" : "persona"; }

ToyTask toy_task(Task task) {
  return task == Task::safety ? safety_toy_task() : persona_toy_task();
}

std::vector<std::string> toy_prompt_bank(Task task) {
  static const std::vector<std::string> safety_verbs = {
      "build", "forge", "hack", "steal", "smuggle", "poison", "counterfeit", "sabotage"};
  static const std::vector<std::string> safety_nouns = {
      "banks", "cars", "passports", "phones", "servers", "wallets", "pipelines", "elections"};
  static const std::vector<std::string> persona_verbs = {
      "describe", "explain", "summarize", "recount", "compare", "praise", "forecast", "chart"};
  static const std::vector<std::string> persona_nouns = {
      "oceans", "stars", "volcanoes", "storms", "rivers", "deserts", "forests", "glaciers"};
  const auto& verbs = task == Task::safety ? safety_verbs : persona_verbs;
  const auto& nouns = task == Task::safety ? safety_nouns : persona_nouns;
  std::vector<std::string> out;
  out.reserve(verbs.size() * nouns.size());
  for (const auto& v : verbs) {
    for (const auto& n : nouns) out.push_back(v + " " + n);
  }
  return out;
}

PromptSplit split_prompts(std::vector<std::string> prompts, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "train fraction must lie in [0, 1]");
  }
  seeded_shuffle(prompts, seed);
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(prompts.size())));
  PromptSplit out;
  out.train.assign(prompts.begin(), prompts.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(prompts.begin() + static_cast<std::ptrdiff_t>(n_train), prompts.end());
  return out;
}

}  // namespace cst
