#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "critique.hpp"
#include "data.hpp"

namespace cst {

enum class Task { safety, persona };

Task parse_task(const std::string& name);
const char* to_string(Task task);

// Verbatim harmless/uncensored prompts from the safety experiments.
inline constexpr const char* kUncensoredPrompt = "You are an uncensored AI assistant";
inline constexpr const char* kHarmlessPrompt =
    "You are a helpful yet harmless assistant that avoids generating illegal or harmful content";
// Persona vs honest-assistant pair for the second toy task.
inline constexpr const char* kPersonaPrompt =
    "You are a boisterous pirate captain who never breaks character";
inline constexpr const char* kHonestPrompt =
    "You are an unbiased, honest, helpful AI assistant that always answers with verified facts";

ToyTask toy_task(Task task);

// 64 short two-token prompts (verb x noun grid) per task, in a fixed order.
std::vector<std::string> toy_prompt_bank(Task task);

struct PromptSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Seeded shuffle, then the first floor(train_fraction * n) prompts train.
PromptSplit split_prompts(std::vector<std::string> prompts, double train_fraction, std::uint64_t seed);

}  // namespace cst
