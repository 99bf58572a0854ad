#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "data.hpp"
#include "error.hpp"
#include "http_client.hpp"

namespace cst {

enum class Stage { original, critique, revision };

const char* to_string(Stage stage);

struct GenerationRequest {
  Stage stage = Stage::original;
  std::string system;
  std::string user;           // fully rendered user text
  std::string source_prompt;  // the prompt x the chain started from
  int max_tokens = 128;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string generate(const GenerationRequest& request) = 0;
};

// Answer shapes emitted by the rule-based generator. "{slug}" is replaced
// by the whitespace-normalized source prompt.
struct ToyTask {
  std::string original_template;
  std::string revision_template;
  std::string critique_text;
  std::string off_policy_template;
};

ToyTask safety_toy_task();   // UNSAFE_CONTENT / SAFE_REFUSAL
ToyTask persona_toy_task();  // PERSONA_VOICE / HONEST_FACT

// Collapses whitespace runs into single spaces and trims the ends.
std::string slug(std::string_view text);

// Deterministic stand-in for a prompted LLM:
//   critique stage            -> critique_text
//   revision stage or s == s1 -> revision_template
//   s == s0                   -> original_template
//   anything else             -> off_policy_template
class ToyGenerator : public Generator {
 public:
  ToyGenerator(std::uint64_t seed, SystemPromptPair sp, ToyTask task);

  std::string generate(const GenerationRequest& request) override;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  SystemPromptPair sp_;
  ToyTask task_;
};

// Original-stage call of the safety toy generator.
std::string toy_generate(std::uint64_t seed, const SystemPromptPair& sp, std::string_view system,
                         std::string_view prompt);

// POST {"system", "prompt", "max_tokens"} -> {"text"}. Returned text is
// whitespace-normalized so it never contains line breaks.
class RemoteGenerator : public Generator {
 public:
  explicit RemoteGenerator(HttpEndpointConfig endpoint);

  std::string generate(const GenerationRequest& request) override;

  JsonHttpClient& client() noexcept { return client_; }

 private:
  JsonHttpClient client_;
};

struct CritiqueTemplates {
  std::string critic_system = "You are a careful reviewer of AI assistant answers";
  std::string critic = "Identify any harmful or illegal content in the answer: {answer}";
  std::string reviser =
      "Rewrite the answer to be harmless and safe, per this critique: {critique}. Original: {answer}";

  // critic needs {answer}; reviser needs {critique} and {answer}. {prompt}
  // is substituted wherever it appears.
  void validate() const;
};

std::string fill_template(std::string_view tmpl, std::string_view prompt, std::string_view answer,
                          std::string_view critique);

struct CritiqueRecord {
  std::string prompt;
  std::string original;
  std::string critique;
  std::string revision;
};

class SynthesisError : public Error {
 public:
  SynthesisError(Stage stage, const std::string& message)
      : Error(ErrorCode::transport, std::string("stage '") + to_string(stage) + "' failed: " + message),
        stage_(stage) {}
  SynthesisError(Stage stage, ErrorCode code, const std::string& message)
      : Error(code, message), stage_(stage) {}

  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

// original under s0 -> critique under the critic instruction -> revision
// under s1 with the critique inserted.
CritiqueRecord synthesize_pair(Generator& generator, const std::string& prompt,
                               const SystemPromptPair& sp, const CritiqueTemplates& templates,
                               int max_tokens = 128);

struct SynthesisFailure {
  std::size_t index = 0;
  std::string prompt;
  Stage stage = Stage::original;
  std::string message;
};

struct SynthesisResult {
  std::vector<PreferencePair> pairs;
  std::vector<SynthesisFailure> failures;
};

// One pair per prompt, in order. Failed prompts are collected; unless
// allow_partial is set any failure throws Error(partial) listing them.
SynthesisResult synthesize_dataset(Generator& generator, std::span<const std::string> prompts,
                                   const SystemPromptPair& sp, const CritiqueTemplates& templates,
                                   const std::string& source_tag, bool allow_partial = false,
                                   int max_tokens = 128);

}  // namespace cst
