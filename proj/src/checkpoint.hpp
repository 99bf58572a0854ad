#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "model.hpp"

namespace cst {

inline constexpr int kCheckpointFormatVersion = 1;

// {"format_version":1,"arch":{"K","E","H","V"},"vocab":[...],"params":[...]}
// Parameters are written with 17 significant digits so a reload is
// bit-identical.
std::string checkpoint_json(const TinyLM& model);
TinyLM parse_checkpoint(std::string_view text);

void save_checkpoint(const TinyLM& model, const std::filesystem::path& path);
TinyLM load_checkpoint(const std::filesystem::path& path);

// Shortest text that round-trips `value`, using at least 17 significant
// digits; shared with the other text writers.
std::string format_double17(double value);

}  // namespace cst
