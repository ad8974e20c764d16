#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deepfactor/inference.hpp"
#include "deepfactor/model.hpp"

namespace deepfactor::io {

/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Shortest representation that round-trips, '.' decimal separator.
std::string format_double(double value);

/// Rows are dimensions, columns instances; header `t0,t1,...`.
std::string matrix_csv(const FactorMatrix& m);
FactorMatrix parse_matrix_csv(std::string_view text, const std::string& source_name);
FactorMatrix read_matrix_csv(const std::filesystem::path& path);

/// Columns: iteration,K,log_joint,accepted_adds,accepted_deletes.
std::string trace_csv(const std::vector<infer::TraceRow>& trace);

/// Sidecar describing a generated dataset, including the true weights and
/// factors of every layer.
std::string dataset_sidecar_json(const GenerativeModel& model,
                                 const std::vector<FactorMatrix>& layers, std::uint64_t seed);

/// Final chain state of every inferred layer.
std::string state_snapshot_json(const std::vector<infer::LayerRun>& layers, std::uint64_t seed,
                                const std::string& config_json);

}  // namespace deepfactor::io
