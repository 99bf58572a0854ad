#include "critique.hpp"

#include "model.hpp"

namespace cst {

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::original: return "original";
    case Stage::critique: return "critique";
    case Stage::revision: return "revision";
  }
  return "unknown";
}

ToyTask safety_toy_task() {
  return {"here is how: UNSAFE_CONTENT {slug}", "SAFE_REFUSAL i cannot help with {slug}",
          "contains UNSAFE_CONTENT", "i am not sure about {slug}"};
}

ToyTask persona_toy_task() {
  return {"PERSONA_VOICE arr matey , {slug} be a grand tale",
          "HONEST_FACT plain facts about {slug}", "contains PERSONA_VOICE",
          "i am not sure about {slug}"};
}

std::string slug(std::string_view text) {
  std::string out;
  for (const auto& tok : split_whitespace(text)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

namespace {

std::string replace_all(std::string_view text, std::string_view needle, std::string_view value) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto hit = text.find(needle, pos);
    if (hit == std::string_view::npos) break;
    out.append(text.substr(pos, hit - pos));
    out.append(value);
    pos = hit + needle.size();
  }
  out.append(text.substr(pos));
  return out;
}

}  // namespace

ToyGenerator::ToyGenerator(std::uint64_t seed, SystemPromptPair sp, ToyTask task)
    : seed_(seed), sp_(std::move(sp)), task_(std::move(task)) {}

std::string ToyGenerator::generate(const GenerationRequest& request) {
  const auto s = slug(request.source_prompt);
  if (request.stage == Stage::critique) return task_.critique_text;
  if (request.stage == Stage::revision || request.system == sp_.s1) {
    return replace_all(task_.revision_template, "{slug}", s);
  }
  if (request.system == sp_.s0) return replace_all(task_.original_template, "{slug}", s);
  return replace_all(task_.off_policy_template, "{slug}", s);
}

std::string toy_generate(std::uint64_t seed, const SystemPromptPair& sp, std::string_view system,
                         std::string_view prompt) {
  ToyGenerator gen(seed, sp, safety_toy_task());
  GenerationRequest req;
  req.system = std::string(system);
  req.user = std::string(prompt);
  req.source_prompt = std::string(prompt);
  return gen.generate(req);
}

RemoteGenerator::RemoteGenerator(HttpEndpointConfig endpoint) : client_(std::move(endpoint)) {}

std::string RemoteGenerator::generate(const GenerationRequest& request) {
  nlohmann::json body = {
      {"system", request.system}, {"prompt", request.user}, {"max_tokens", request.max_tokens}};
  const auto reply = client_.post(body);
  auto it = reply.find("text");
  if (it == reply.end() || !it->is_string()) {
    throw Error(ErrorCode::transport, "generator reply has no string field 'text'");
  }
  return slug(it->get<std::string>());
}

void CritiqueTemplates::validate() const {
  auto need = [](const std::string& tmpl, const char* name, const char* placeholder) {
    if (tmpl.find(placeholder) == std::string::npos) {
      throw Error(ErrorCode::invalid_argument,
                  std::string(name) + " template lacks placeholder " + placeholder);
    }
  };
  need(critic, "critic", "{answer}");
  need(reviser, "reviser", "{critique}");
  need(reviser, "reviser", "{answer}");
}

std::string fill_template(std::string_view tmpl, std::string_view prompt, std::string_view answer,
                          std::string_view critique) {
  auto out = replace_all(tmpl, "{prompt}", prompt);
  out = replace_all(out, "{answer}", answer);
  return replace_all(out, "{critique}", critique);
}

namespace {

std::string run_stage(Generator& g, GenerationRequest req) {
  const auto stage = req.stage;
  try {
    return g.generate(req);
  } catch (const SynthesisError&) {
    throw;
  } catch (const std::exception& e) {
    throw SynthesisError(stage, e.what());
  }
}

}  // namespace

CritiqueRecord synthesize_pair(Generator& generator, const std::string& prompt,
                               const SystemPromptPair& sp, const CritiqueTemplates& templates,
                               int max_tokens) {
  templates.validate();
  validate_system_prompts(sp);
  CritiqueRecord rec;
  rec.prompt = prompt;
  rec.original = run_stage(generator, {Stage::original, sp.s0, prompt, prompt, max_tokens});
  rec.critique = run_stage(generator, {Stage::critique, templates.critic_system,
                                       fill_template(templates.critic, prompt, rec.original, ""),
                                       prompt, max_tokens});
  rec.revision = run_stage(
      generator, {Stage::revision, sp.s1,
                  fill_template(templates.reviser, prompt, rec.original, rec.critique), prompt,
                  max_tokens});
  if (rec.revision == rec.original) {
    throw SynthesisError(Stage::revision, ErrorCode::validation, "revision identical");
  }
  return rec;
}

SynthesisResult synthesize_dataset(Generator& generator, std::span<const std::string> prompts,
                                   const SystemPromptPair& sp, const CritiqueTemplates& templates,
                                   const std::string& source_tag, bool allow_partial,
                                   int max_tokens) {
  if (prompts.empty()) throw Error(ErrorCode::invalid_argument, "no prompts to synthesize");
  templates.validate();
  SynthesisResult out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    try {
      auto rec = synthesize_pair(generator, prompts[i], sp, templates, max_tokens);
      out.pairs.push_back({rec.prompt, rec.original, rec.revision, source_tag});
    } catch (const SynthesisError& e) {
      out.failures.push_back({i, prompts[i], e.stage(), e.what()});
    }
  }
  if (!out.failures.empty() && !allow_partial) {
    std::string msg = std::to_string(out.failures.size()) + " of " + std::to_string(prompts.size()) +
                      " prompts failed";
    for (const auto& f : out.failures) {
      msg += "\n  prompt " + std::to_string(f.index) + " (" + to_string(f.stage) + "): " + f.message;
    }
    throw Error(ErrorCode::partial, msg);
  }
  return out;
}

}  // namespace cst
