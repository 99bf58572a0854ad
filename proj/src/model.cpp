#include "model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>

#include "error.hpp"

namespace cst {

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

const std::vector<std::string>& Vocabulary::reserved_tokens() {
  static const std::vector<std::string> tokens = {"<bos>", "<eos>", "<sys>",
                                                  "<usr>", "<asst>", "<unk>"};
  return tokens;
}

Vocabulary::Vocabulary() : Vocabulary(reserved_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty() || !index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw Error(ErrorCode::invalid_argument, "duplicate or empty vocabulary token: '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  const auto& res = reserved_tokens();
  if (tokens.size() < res.size() || !std::equal(res.begin(), res.end(), tokens.begin())) {
    throw Error(ErrorCode::invalid_argument, "vocabulary must start with the reserved markers");
  }
  return Vocabulary(std::move(tokens));
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? reserved::unk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(ErrorCode::invalid_argument, "token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

Vocabulary build_vocab(std::span<const std::string> corpus) {
  if (corpus.empty()) throw Error(ErrorCode::invalid_argument, "empty corpus");
  const auto& res = Vocabulary::reserved_tokens();
  std::set<std::string> words;
  for (const auto& record : corpus) {
    for (auto& tok : split_whitespace(record)) {
      if (std::find(res.begin(), res.end(), tok) == res.end()) words.insert(std::move(tok));
    }
  }
  std::vector<std::string> tokens(res.begin(), res.end());
  tokens.insert(tokens.end(), words.begin(), words.end());
  return Vocabulary::from_tokens(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

void append_text(const Vocabulary& vocab, std::string_view text, std::vector<TokenId>& out) {
  for (const auto& tok : split_whitespace(text)) out.push_back(vocab.id(tok));
}

}  // namespace

std::vector<TokenId> render_prompt(const Vocabulary& vocab, std::string_view system,
                                   std::string_view prompt) {
  std::vector<TokenId> out{reserved::bos, reserved::sep_sys};
  append_text(vocab, system, out);
  out.push_back(reserved::sep_usr);
  append_text(vocab, prompt, out);
  out.push_back(reserved::sep_asst);
  return out;
}

RenderedSequence render_context(const Vocabulary& vocab, std::string_view system,
                                std::string_view prompt, std::string_view completion) {
  RenderedSequence seq;
  seq.tokens = render_prompt(vocab, system, prompt);
  seq.completion_begin = seq.tokens.size();
  append_text(vocab, completion, seq.tokens);
  seq.tokens.push_back(reserved::eos);
  return seq;
}

// ---------------------------------------------------------------------------
// Layout and model

ParamLayout::ParamLayout(std::size_t vocab_size, const Architecture& arch) {
  if (arch.context <= 0 || arch.embed <= 0 || arch.hidden <= 0) {
    throw Error(ErrorCode::invalid_argument, "architecture dimensions must be positive");
  }
  const auto V = vocab_size;
  const auto K = static_cast<std::size_t>(arch.context);
  const auto E = static_cast<std::size_t>(arch.embed);
  const auto H = static_cast<std::size_t>(arch.hidden);
  auto add = [this](std::string name, std::size_t rows, std::size_t cols) {
    blocks_.push_back({std::move(name), total_, rows, cols});
    total_ += rows * cols;
  };
  add("token_embedding", V, E);
  add("slot_embedding", K, E);
  add("system_embedding", V, E);
  add("hidden_weight", H, (K + 1) * E);
  add("hidden_bias", H, 1);
  add("output_weight", V, H);
  add("output_bias", V, 1);
}

TinyLM::TinyLM(Vocabulary vocab, Architecture arch)
    : vocab_(std::move(vocab)), arch_(arch), layout_(vocab_.size(), arch_),
      params_(layout_.total(), 0.0) {}

TinyLM::TinyLM(Vocabulary vocab, Architecture arch, std::vector<double> params)
    : TinyLM(std::move(vocab), arch) {
  set_params(std::move(params));
}

TinyLM TinyLM::random(Vocabulary vocab, Architecture arch, std::uint64_t seed, double scale) {
  TinyLM model(std::move(vocab), arch);
  // Raw engine bits keep the draw identical across standard libraries.
  std::mt19937_64 engine(seed);
  for (auto& p : model.params_) {
    const double unit = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    p = scale * (2.0 * unit - 1.0);
  }
  return model;
}

void TinyLM::set_params(std::vector<double> params) {
  if (params.size() != layout_.total()) {
    throw Error(ErrorCode::invalid_argument,
                "parameter count " + std::to_string(params.size()) + " does not match layout total " +
                    std::to_string(layout_.total()));
  }
  params_ = std::move(params);
}

namespace {

struct Activations {
  std::vector<TokenId> window;
  std::vector<TokenId> system;  // tokens between SEP_SYS and SEP_USR
  std::vector<double> input;    // K window slots of E, then the system slot
  std::vector<double> hidden;
  std::vector<double> logits;
  double max_logit = 0.0;
  double sum_exp = 0.0;

  explicit Activations(const TinyLM& m)
      : window(static_cast<std::size_t>(m.arch().context)),
        input(static_cast<std::size_t>(m.arch().context + 1) * static_cast<std::size_t>(m.arch().embed)),
        hidden(static_cast<std::size_t>(m.arch().hidden)),
        logits(m.vocab_size()) {}

  double log_norm() const { return max_logit + std::log(sum_exp); }
};

void fill_window(std::span<const TokenId> seq, std::size_t pos, std::vector<TokenId>& window) {
  const auto K = window.size();
  for (std::size_t k = 0; k < K; ++k) {
    // Slot k holds the token at pos - K + k.
    const std::ptrdiff_t idx =
        static_cast<std::ptrdiff_t>(pos) - static_cast<std::ptrdiff_t>(K) + static_cast<std::ptrdiff_t>(k);
    window[k] = idx < 0 ? reserved::bos : seq[static_cast<std::size_t>(idx)];
  }
}

// Histories that do not open with BOS SEP_SYS have an empty system span.
void find_system(std::span<const TokenId> seq, std::vector<TokenId>& system) {
  system.clear();
  if (seq.size() < 2 || seq[0] != reserved::bos || seq[1] != reserved::sep_sys) return;
  for (std::size_t i = 2; i < seq.size() && seq[i] != reserved::sep_usr; ++i) system.push_back(seq[i]);
}

void forward(const TinyLM& m, Activations& a) {
  const auto& L = m.layout();
  const auto p = m.params();
  const auto K = a.window.size();
  const auto E = static_cast<std::size_t>(m.arch().embed);
  const auto D = a.input.size();
  const auto H = a.hidden.size();
  const auto V = a.logits.size();

  const double* tok = p.data() + L.token_embedding().offset;
  const double* slot = p.data() + L.slot_embedding().offset;
  for (std::size_t k = 0; k < K; ++k) {
    const double* row = tok + static_cast<std::size_t>(a.window[k]) * E;
    const double* srow = slot + k * E;
    double* dst = a.input.data() + k * E;
    for (std::size_t e = 0; e < E; ++e) dst[e] = row[e] + srow[e];
  }
  // System slot: mean of the system-prompt token rows (zero when empty).
  double* sys = a.input.data() + K * E;
  std::fill(sys, sys + E, 0.0);
  if (!a.system.empty()) {
    const double* semb = p.data() + L.system_embedding().offset;
    for (TokenId t : a.system) {
      const double* row = semb + static_cast<std::size_t>(t) * E;
      for (std::size_t e = 0; e < E; ++e) sys[e] += row[e];
    }
    const double inv = 1.0 / static_cast<double>(a.system.size());
    for (std::size_t e = 0; e < E; ++e) sys[e] *= inv;
  }

  const double* w1 = p.data() + L.hidden_weight().offset;
  const double* b1 = p.data() + L.hidden_bias().offset;
  for (std::size_t h = 0; h < H; ++h) {
    double z = b1[h];
    const double* row = w1 + h * D;
    for (std::size_t d = 0; d < D; ++d) z += row[d] * a.input[d];
    a.hidden[h] = std::tanh(z);
  }

  const double* w2 = p.data() + L.output_weight().offset;
  const double* b2 = p.data() + L.output_bias().offset;
  double mx = -INFINITY;
  for (std::size_t v = 0; v < V; ++v) {
    double z = b2[v];
    const double* row = w2 + v * H;
    for (std::size_t h = 0; h < H; ++h) z += row[h] * a.hidden[h];
    a.logits[v] = z;
    mx = std::max(mx, z);
  }
  double sum = 0.0;
  for (std::size_t v = 0; v < V; ++v) sum += std::exp(a.logits[v] - mx);
  a.max_logit = mx;
  a.sum_exp = sum;
}

// Adds scale * d log p(target) / d params into grad.
void backward(const TinyLM& m, const Activations& a, TokenId target, double scale,
              std::span<double> grad, std::vector<double>& d_hidden, std::vector<double>& d_input) {
  const auto& L = m.layout();
  const auto p = m.params();
  const auto K = a.window.size();
  const auto E = static_cast<std::size_t>(m.arch().embed);
  const auto D = a.input.size();
  const auto H = a.hidden.size();
  const auto V = a.logits.size();

  const double* w2 = p.data() + L.output_weight().offset;
  double* gw2 = grad.data() + L.output_weight().offset;
  double* gb2 = grad.data() + L.output_bias().offset;
  std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
  for (std::size_t v = 0; v < V; ++v) {
    const double prob = std::exp(a.logits[v] - a.max_logit) / a.sum_exp;
    const double dz = scale * ((static_cast<TokenId>(v) == target ? 1.0 : 0.0) - prob);
    gb2[v] += dz;
    double* grow = gw2 + v * H;
    const double* row = w2 + v * H;
    for (std::size_t h = 0; h < H; ++h) {
      grow[h] += dz * a.hidden[h];
      d_hidden[h] += dz * row[h];
    }
  }

  const double* w1 = p.data() + L.hidden_weight().offset;
  double* gw1 = grad.data() + L.hidden_weight().offset;
  double* gb1 = grad.data() + L.hidden_bias().offset;
  std::fill(d_input.begin(), d_input.end(), 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    const double dz = d_hidden[h] * (1.0 - a.hidden[h] * a.hidden[h]);
    gb1[h] += dz;
    double* grow = gw1 + h * D;
    const double* row = w1 + h * D;
    for (std::size_t d = 0; d < D; ++d) {
      grow[d] += dz * a.input[d];
      d_input[d] += dz * row[d];
    }
  }

  double* gtok = grad.data() + L.token_embedding().offset;
  double* gslot = grad.data() + L.slot_embedding().offset;
  for (std::size_t k = 0; k < K; ++k) {
    double* trow = gtok + static_cast<std::size_t>(a.window[k]) * E;
    double* srow = gslot + k * E;
    const double* src = d_input.data() + k * E;
    for (std::size_t e = 0; e < E; ++e) {
      trow[e] += src[e];
      srow[e] += src[e];
    }
  }
  if (!a.system.empty()) {
    double* gsys = grad.data() + L.system_embedding().offset;
    const double* src = d_input.data() + K * E;
    const double inv = 1.0 / static_cast<double>(a.system.size());
    for (TokenId t : a.system) {
      double* row = gsys + static_cast<std::size_t>(t) * E;
      for (std::size_t e = 0; e < E; ++e) row[e] += src[e] * inv;
    }
  }
}

}  // namespace

std::vector<double> TinyLM::next_token_probs(std::span<const TokenId> history) const {
  Activations a(*this);
  find_system(history, a.system);
  fill_window(history, history.size(), a.window);
  forward(*this, a);
  std::vector<double> probs(a.logits.size());
  for (std::size_t v = 0; v < probs.size(); ++v) {
    probs[v] = std::exp(a.logits[v] - a.max_logit) / a.sum_exp;
  }
  return probs;
}

ReferenceModel snapshot_reference(const TinyLM& model) { return ReferenceModel(model); }

ReferenceModel snapshot_reference(const ReferenceModel& reference) {
  return ReferenceModel(reference.model());
}

double seq_logprob(const TinyLM& model, const RenderedSequence& sequence) {
  Activations a(model);
  find_system(sequence.tokens, a.system);
  double total = 0.0;
  for (std::size_t pos = sequence.completion_begin; pos < sequence.tokens.size(); ++pos) {
    fill_window(sequence.tokens, pos, a.window);
    forward(model, a);
    const auto target = static_cast<std::size_t>(sequence.tokens[pos]);
    total += a.logits[target] - a.log_norm();
  }
  return total;
}

double seq_logprob(const TinyLM& model, std::string_view system, std::string_view prompt,
                   std::string_view completion) {
  return seq_logprob(model, render_context(model.vocab(), system, prompt, completion));
}

double seq_logprob(const ReferenceModel& reference, std::string_view system,
                   std::string_view prompt, std::string_view completion) {
  return seq_logprob(reference.model(), system, prompt, completion);
}

double seq_logprob_accumulate(const TinyLM& model, const RenderedSequence& sequence,
                              double scale, std::span<double> grad) {
  if (grad.size() != model.layout().total()) {
    throw Error(ErrorCode::invalid_argument, "gradient buffer does not match parameter layout");
  }
  Activations a(model);
  find_system(sequence.tokens, a.system);
  std::vector<double> d_hidden(a.hidden.size());
  std::vector<double> d_input(a.input.size());
  double total = 0.0;
  for (std::size_t pos = sequence.completion_begin; pos < sequence.tokens.size(); ++pos) {
    fill_window(sequence.tokens, pos, a.window);
    forward(model, a);
    const TokenId target = sequence.tokens[pos];
    total += a.logits[static_cast<std::size_t>(target)] - a.log_norm();
    if (scale != 0.0) backward(model, a, target, scale, grad, d_hidden, d_input);
  }
  return total;
}

std::vector<double> seq_logprob_grad(const TinyLM& model, std::string_view system,
                                     std::string_view prompt, std::string_view completion) {
  std::vector<double> grad(model.layout().total(), 0.0);
  seq_logprob_accumulate(model, render_context(model.vocab(), system, prompt, completion), 1.0,
                         grad);
  return grad;
}

std::string greedy_generate(const TinyLM& model, std::string_view system,
                            std::string_view prompt, int max_len) {
  if (max_len < 1) throw Error(ErrorCode::invalid_argument, "max_len must be at least 1");
  auto seq = render_prompt(model.vocab(), system, prompt);
  Activations a(model);
  find_system(seq, a.system);
  std::string out;
  for (int step = 0; step < max_len; ++step) {
    fill_window(seq, seq.size(), a.window);
    forward(model, a);
    // First maximum wins, so ties resolve to the lowest index.
    const auto best = static_cast<TokenId>(
        std::max_element(a.logits.begin(), a.logits.end()) - a.logits.begin());
    if (best == reserved::eos) break;
    if (!out.empty()) out.push_back(' ');
    out += model.vocab().token(best);
    seq.push_back(best);
  }
  return out;
}

}  // namespace cst
