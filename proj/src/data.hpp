#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cst {

// Raw synthetic triple: prompt x, original answer y0, revised answer y1.
struct PreferencePair {
  std::string prompt;
  std::string original;
  std::string revised;
  std::string source_tag;

  bool operator==(const PreferencePair&) const = default;
};

// Two opposed system prompts plus the score labels used when evaluating
// generations under each of them (s0 -> first label, s1 -> second label).
struct SystemPromptPair {
  std::string s0;
  std::string s1;
  std::pair<std::string, std::string> score_labels{"S0", "S1"};
};

void validate_system_prompts(const SystemPromptPair& sp);

struct CSTTuple {
  std::string system;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  std::string source_tag;

  bool operator==(const CSTTuple&) const = default;
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<CSTTuple> tuples) : tuples_(std::move(tuples)) {}

  const std::vector<CSTTuple>& tuples() const noexcept { return tuples_; }
  std::size_t size() const noexcept { return tuples_.size(); }
  bool empty() const noexcept { return tuples_.empty(); }
  const CSTTuple& operator[](std::size_t i) const { return tuples_[i]; }

  auto begin() const { return tuples_.begin(); }
  auto end() const { return tuples_.end(); }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<CSTTuple> tuples_;
};

// Empty result means the pair is valid.
std::vector<std::string> pair_violations(const PreferencePair& pair);

// For each pair, (s0, x, y0 > y1) followed by (s1, x, y1 > y0).
Dataset cst_augment(std::span<const PreferencePair> pairs, const SystemPromptPair& sp);

// Safety-prompt-only baseline: (s1, x, y1 > y0) per pair.
Dataset dpo_only_view(std::span<const PreferencePair> pairs, const SystemPromptPair& sp);

// Concatenation of a and b, then a seeded Fisher-Yates shuffle.
Dataset mix_datasets(const Dataset& a, const Dataset& b, std::uint64_t seed);

// 64-bit LCG (Knuth MMIX constants). Draws use the high 32 bits of the
// state:  state = state * 6364136223846793005 + 1442695040888963407.
class Lcg64 {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

  explicit Lcg64(std::uint64_t seed) : state_(seed) {}

  std::uint32_t next() {
    state_ = state_ * kMultiplier + kIncrement;
    return static_cast<std::uint32_t>(state_ >> 32);
  }

  // Uniform-ish in [0, bound); bound must be nonzero.
  std::uint32_t below(std::uint32_t bound) { return next() % bound; }

 private:
  std::uint64_t state_;
};

// for i = n-1 .. 1: j = lcg.below(i + 1); swap(v[i], v[j])
template <class T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  Lcg64 lcg(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = lcg.below(static_cast<std::uint32_t>(i));
    std::swap(items[i - 1], items[j]);
  }
}

struct Violation {
  std::size_t index = 0;
  std::string message;

  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate(const Dataset& dataset);

// JSONL, one object per line with keys system, prompt, chosen, rejected,
// source_tag (in that order).
std::string to_jsonl(const Dataset& dataset);
Dataset parse_jsonl(std::istream& in);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_jsonl(const std::filesystem::path& path);

// Raw pairs: keys prompt, original, revised, source_tag.
std::string pairs_to_jsonl(std::span<const PreferencePair> pairs);
std::vector<PreferencePair> parse_pairs_jsonl(std::istream& in);
void save_pairs_jsonl(std::span<const PreferencePair> pairs, const std::filesystem::path& path);
std::vector<PreferencePair> load_pairs_jsonl(const std::filesystem::path& path);

// Helpers shared by the file-based commands.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);
// Non-empty lines, trimmed of trailing CR.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace cst
