#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cst {

using TokenId = std::int32_t;

// Reserved marker indices. They occupy the first slots of every vocabulary.
namespace reserved {
inline constexpr TokenId bos = 0;
inline constexpr TokenId eos = 1;
inline constexpr TokenId sep_sys = 2;
inline constexpr TokenId sep_usr = 3;
inline constexpr TokenId sep_asst = 4;
inline constexpr TokenId unk = 5;
inline constexpr std::size_t count = 6;
}  // namespace reserved

std::vector<std::string> split_whitespace(std::string_view text);

class Vocabulary {
 public:
  // Reserved markers only.
  Vocabulary();

  // `tokens` must start with the reserved markers in canonical order and
  // contain no duplicates.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  static const std::vector<std::string>& reserved_tokens();

  // Unknown strings map to reserved::unk.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  explicit Vocabulary(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Whitespace tokens of the corpus, deduplicated and sorted, after the
// reserved markers. Throws on an empty corpus.
Vocabulary build_vocab(std::span<const std::string> corpus);

struct RenderedSequence {
  std::vector<TokenId> tokens;
  // Index of the first completion token; the completion runs to the end
  // of `tokens` and always finishes with EOS.
  std::size_t completion_begin = 0;

  std::size_t completion_size() const { return tokens.size() - completion_begin; }
};

// BOS SEP_SYS s SEP_USR x SEP_ASST y EOS
RenderedSequence render_context(const Vocabulary& vocab, std::string_view system,
                                std::string_view prompt, std::string_view completion);

// Prompt part only (everything up to and including SEP_ASST).
std::vector<TokenId> render_prompt(const Vocabulary& vocab, std::string_view system,
                                   std::string_view prompt);

struct Architecture {
  int context = 8;  // K
  int embed = 32;   // E
  int hidden = 64;  // H

  bool operator==(const Architecture&) const = default;
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
};

// Flat parameter order: token embeddings [V x E], window-slot embeddings
// [K x E], system-prompt embeddings [V x E], hidden weights [H x (K+1)*E],
// hidden bias [H], output weights [V x H], output bias [V]. Matrices are
// row-major.
class ParamLayout {
 public:
  ParamLayout() = default;
  ParamLayout(std::size_t vocab_size, const Architecture& arch);

  const std::vector<ParamBlock>& manifest() const noexcept { return blocks_; }
  std::size_t total() const noexcept { return total_; }

  const ParamBlock& token_embedding() const { return blocks_[0]; }
  const ParamBlock& slot_embedding() const { return blocks_[1]; }
  const ParamBlock& system_embedding() const { return blocks_[2]; }
  const ParamBlock& hidden_weight() const { return blocks_[3]; }
  const ParamBlock& hidden_bias() const { return blocks_[4]; }
  const ParamBlock& output_weight() const { return blocks_[5]; }
  const ParamBlock& output_bias() const { return blocks_[6]; }

 private:
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

// Neural n-gram language model over a fixed window of the last K tokens:
// per-slot (token + slot) embeddings concatenated with a system slot (mean
// system-prompt embedding, so every position is conditioned on s), one tanh
// hidden layer, softmax output.
class TinyLM {
 public:
  // All parameters zero (uniform next-token distribution).
  TinyLM(Vocabulary vocab, Architecture arch);
  TinyLM(Vocabulary vocab, Architecture arch, std::vector<double> params);

  // Parameters uniform in [-scale, scale] drawn from `seed`.
  static TinyLM random(Vocabulary vocab, Architecture arch, std::uint64_t seed,
                       double scale = 0.05);

  const Vocabulary& vocab() const noexcept { return vocab_; }
  const Architecture& arch() const noexcept { return arch_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }

  std::span<const double> params() const noexcept { return params_; }
  std::span<double> mutable_params() noexcept { return params_; }
  void set_params(std::vector<double> params);

  // Next-token distribution after `history` (only the last K tokens matter;
  // shorter histories are left-padded with BOS).
  std::vector<double> next_token_probs(std::span<const TokenId> history) const;

 private:
  Vocabulary vocab_;
  Architecture arch_;
  ParamLayout layout_;
  std::vector<double> params_;
};

// Frozen copy of a TinyLM. Only const access is exposed.
class ReferenceModel {
 public:
  explicit ReferenceModel(TinyLM model) : model_(std::move(model)) {}

  const TinyLM& model() const noexcept { return model_; }
  std::span<const double> params() const noexcept { return model_.params(); }

 private:
  TinyLM model_;
};

ReferenceModel snapshot_reference(const TinyLM& model);
ReferenceModel snapshot_reference(const ReferenceModel& reference);

// log pi(y | s, x) in nats: sum over y's tokens and the closing EOS.
double seq_logprob(const TinyLM& model, std::string_view system, std::string_view prompt,
                   std::string_view completion);
double seq_logprob(const ReferenceModel& reference, std::string_view system,
                   std::string_view prompt, std::string_view completion);
double seq_logprob(const TinyLM& model, const RenderedSequence& sequence);

// Returns log pi(y | s, x) and adds `scale` * its gradient into `grad`
// (which must have the layout's total size).
double seq_logprob_accumulate(const TinyLM& model, const RenderedSequence& sequence,
                              double scale, std::span<double> grad);

std::vector<double> seq_logprob_grad(const TinyLM& model, std::string_view system,
                                     std::string_view prompt, std::string_view completion);

// Argmax decoding after SEP_ASST; stops at EOS or after max_len tokens.
// Ties go to the lowest token index.
std::string greedy_generate(const TinyLM& model, std::string_view system,
                            std::string_view prompt, int max_len);

}  // namespace cst
