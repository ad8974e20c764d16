#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "deepfactor/experiment.hpp"
#include "deepfactor/inference.hpp"
#include "deepfactor/model.hpp"

namespace deepfactor::config {

/// Parsed run configuration file. Every section is optional; missing values
/// take the defaults of the reference study (N = 16, T = 200, α′ = 3,
/// inverse-gamma(2, 1), 200 iterations).
struct RunConfig {
  HyperParams hyper;
  std::size_t N = 16;
  std::size_t T = 200;
  infer::InferenceConfig inference;
  std::size_t depth = 1;
  experiment::ExperimentConfig experiment;
  std::optional<std::uint64_t> seed;
};

/// Throws Error(Parse) on malformed JSON, wrong types, unknown keys or
/// violated invariants.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON echo (all fields, defaults filled in).
std::string to_json(const RunConfig& cfg);

infer::InitStrategy parse_init(std::string_view spec);

}  // namespace deepfactor::config
