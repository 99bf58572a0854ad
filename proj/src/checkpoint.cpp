#include "checkpoint.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "error.hpp"
#include "json.hpp"

namespace cst {

using json = nlohmann::json;

std::string format_double17(double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::invalid_argument, "cannot serialize non-finite value");
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string checkpoint_json(const TinyLM& model) {
  const auto& arch = model.arch();
  std::string out;
  out.reserve(model.params().size() * 24 + 4096);
  out += "{\"format_version\":" + std::to_string(kCheckpointFormatVersion);
  out += ",\"arch\":{\"K\":" + std::to_string(arch.context) + ",\"E\":" + std::to_string(arch.embed) +
         ",\"H\":" + std::to_string(arch.hidden) + ",\"V\":" + std::to_string(model.vocab_size()) + "}";
  out += ",\"vocab\":[";
  const auto& tokens = model.vocab().tokens();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ',';
    out += json(tokens[i]).dump();
  }
  out += "],\"params\":[";
  const auto params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i) out += ',';
    out += format_double17(params[i]);
  }
  out += "]}\n";
  return out;
}

TinyLM parse_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("malformed checkpoint: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw Error(ErrorCode::parse, "unsupported checkpoint format_version " + std::to_string(version));
    }
    const auto& arch_doc = doc.at("arch");
    Architecture arch{arch_doc.at("K").get<int>(), arch_doc.at("E").get<int>(),
                      arch_doc.at("H").get<int>()};
    auto vocab = Vocabulary::from_tokens(doc.at("vocab").get<std::vector<std::string>>());
    if (arch_doc.at("V").get<std::size_t>() != vocab.size()) {
      throw Error(ErrorCode::parse, "checkpoint arch.V does not match vocab length");
    }
    return TinyLM(std::move(vocab), arch, doc.at("params").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("invalid checkpoint: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::parse) throw;
    throw Error(ErrorCode::parse, std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const TinyLM& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << checkpoint_json(model);
  if (!out) throw Error(ErrorCode::io, "write failed: " + path.string());
}

TinyLM load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace cst
