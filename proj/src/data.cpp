#include "data.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "error.hpp"
#include "json.hpp"

namespace cst {

using ojson = nlohmann::ordered_json;

void validate_system_prompts(const SystemPromptPair& sp) {
  if (sp.s0.empty() || sp.s1.empty()) {
    throw Error(ErrorCode::invalid_argument, "system prompts must be non-empty");
  }
  if (sp.s0 == sp.s1) throw Error(ErrorCode::invalid_argument, "system prompts s0 and s1 must differ");
}

std::vector<std::string> pair_violations(const PreferencePair& pair) {
  std::vector<std::string> out;
  if (pair.prompt.empty()) out.emplace_back("prompt is empty");
  if (pair.original == pair.revised) out.emplace_back("original equals revised");
  return out;
}

namespace {

void check_pairs(std::span<const PreferencePair> pairs) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto problems = pair_violations(pairs[i]);
    if (!problems.empty()) {
      throw Error(ErrorCode::validation,
                  "invalid pair at index " + std::to_string(i) + ": " + problems.front());
    }
  }
}

}  // namespace

Dataset cst_augment(std::span<const PreferencePair> pairs, const SystemPromptPair& sp) {
  validate_system_prompts(sp);
  check_pairs(pairs);
  std::vector<CSTTuple> tuples;
  tuples.reserve(pairs.size() * 2);
  for (const auto& p : pairs) {
    tuples.push_back({sp.s0, p.prompt, p.original, p.revised, p.source_tag});
    tuples.push_back({sp.s1, p.prompt, p.revised, p.original, p.source_tag});
  }
  return Dataset(std::move(tuples));
}

Dataset dpo_only_view(std::span<const PreferencePair> pairs, const SystemPromptPair& sp) {
  validate_system_prompts(sp);
  check_pairs(pairs);
  std::vector<CSTTuple> tuples;
  tuples.reserve(pairs.size());
  for (const auto& p : pairs) tuples.push_back({sp.s1, p.prompt, p.revised, p.original, p.source_tag});
  return Dataset(std::move(tuples));
}

Dataset mix_datasets(const Dataset& a, const Dataset& b, std::uint64_t seed) {
  std::vector<CSTTuple> all = a.tuples();
  all.insert(all.end(), b.begin(), b.end());
  seeded_shuffle(all, seed);
  return Dataset(std::move(all));
}

std::vector<Violation> validate(const Dataset& dataset) {
  std::vector<Violation> out;
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::map<Key, std::size_t> seen;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& t = dataset[i];
    if (t.system.empty()) out.push_back({i, "tuple " + std::to_string(i) + ": system prompt is empty"});
    if (t.chosen == t.rejected) {
      out.push_back({i, "tuple " + std::to_string(i) + ": chosen equals rejected"});
    }
    auto [it, inserted] = seen.emplace(Key{t.system, t.prompt, t.chosen, t.rejected}, i);
    if (!inserted) {
      out.push_back({i, "tuple " + std::to_string(i) + ": duplicate of tuple " + std::to_string(it->second)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

constexpr const char* kTupleKeys[] = {"system", "prompt", "chosen", "rejected", "source_tag"};
constexpr const char* kPairKeys[] = {"prompt", "original", "revised", "source_tag"};

template <std::size_t N>
std::vector<std::string> parse_record(const std::string& line, std::size_t line_no,
                                      const char* const (&keys)[N]) {
  const auto where = " at line " + std::to_string(line_no);
  ojson obj;
  try {
    obj = ojson::parse(line);
  } catch (const ojson::parse_error& e) {
    throw Error(ErrorCode::parse, "malformed JSON" + where + ": " + e.what());
  }
  if (!obj.is_object()) throw Error(ErrorCode::parse, "expected a JSON object" + where);
  std::vector<std::string> fields;
  fields.reserve(N);
  for (const char* key : keys) {
    auto it = obj.find(key);
    if (it == obj.end()) throw Error(ErrorCode::parse, std::string("missing key '") + key + "'" + where);
    if (!it->is_string()) {
      throw Error(ErrorCode::parse, std::string("key '") + key + "' must be a string" + where);
    }
    fields.push_back(it->get<std::string>());
  }
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : keys) known = known || item.key() == key;
    if (!known) throw Error(ErrorCode::parse, "unexpected key '" + item.key() + "'" + where);
  }
  return fields;
}

template <class Fn>
void for_each_record_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(line, line_no);
  }
}

}  // namespace

std::string to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& t : dataset) {
    ojson obj;
    obj["system"] = t.system;
    obj["prompt"] = t.prompt;
    obj["chosen"] = t.chosen;
    obj["rejected"] = t.rejected;
    obj["source_tag"] = t.source_tag;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

Dataset parse_jsonl(std::istream& in) {
  std::vector<CSTTuple> tuples;
  for_each_record_line(in, [&](const std::string& line, std::size_t line_no) {
    auto f = parse_record(line, line_no, kTupleKeys);
    tuples.push_back({std::move(f[0]), std::move(f[1]), std::move(f[2]), std::move(f[3]), std::move(f[4])});
  });
  return Dataset(std::move(tuples));
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  write_text_file(path, to_jsonl(dataset));
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  try {
    return parse_jsonl(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string pairs_to_jsonl(std::span<const PreferencePair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    ojson obj;
    obj["prompt"] = p.prompt;
    obj["original"] = p.original;
    obj["revised"] = p.revised;
    obj["source_tag"] = p.source_tag;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::vector<PreferencePair> parse_pairs_jsonl(std::istream& in) {
  std::vector<PreferencePair> pairs;
  for_each_record_line(in, [&](const std::string& line, std::size_t line_no) {
    auto f = parse_record(line, line_no, kPairKeys);
    pairs.push_back({std::move(f[0]), std::move(f[1]), std::move(f[2]), std::move(f[3])});
  });
  return pairs;
}

void save_pairs_jsonl(std::span<const PreferencePair> pairs, const std::filesystem::path& path) {
  write_text_file(path, pairs_to_jsonl(pairs));
}

std::vector<PreferencePair> load_pairs_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  try {
    return parse_pairs_jsonl(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << contents;
  if (!out) throw Error(ErrorCode::io, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace cst
