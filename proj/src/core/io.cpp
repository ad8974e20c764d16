#include "deepfactor/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

#include "deepfactor/error.hpp"

namespace deepfactor::io {

using nlohmann::json;

namespace {

json nested(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  if (line.empty()) return fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  const std::filesystem::path tmp =
      path.string() + fmt::format(".tmp{}", static_cast<long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw_io("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw_io("cannot move " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw_io("read from " + path.string() + " failed");
  return os.str();
}

std::string format_double(double value) { return fmt::format("{}", value); }

std::string matrix_csv(const FactorMatrix& m) {
  std::string out;
  for (std::size_t t = 0; t < m.cols(); ++t) out += fmt::format("{}t{}", t ? "," : "", t);
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t t = 0; t < m.cols(); ++t) {
      if (t) out += ',';
      out += format_double(m(r, t));
    }
    out += '\n';
  }
  return out;
}

FactorMatrix parse_matrix_csv(std::string_view text, const std::string& source_name) {
  auto lines = split_lines(text);
  if (lines.empty()) throw_parse(source_name + ":1: missing header row");
  const auto header = split_fields(lines[0]);
  for (std::size_t t = 0; t < header.size(); ++t)
    if (trim(header[t]) != "t" + std::to_string(t))
      throw_parse(fmt::format("{}:1: header column {} should be t{}", source_name, t + 1, t));
  const std::size_t T = header.size();
  // A trailing empty line after the final newline is not a row.
  if (T > 0)
    while (lines.size() > 1 && lines.back().empty()) lines.pop_back();

  Eigen::MatrixXd values(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(T));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != T)
      throw_parse(fmt::format("{}:{}: expected {} values, found {}", source_name, i + 1, T, fields.size()));
    for (std::size_t t = 0; t < T; ++t) {
      const std::string_view f = trim(fields[t]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty() || !std::isfinite(v))
        throw_parse(fmt::format("{}:{}: value {} ('{}') is not a finite number", source_name, i + 1, t + 1, f));
      values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(t)) = v;
    }
  }
  return FactorMatrix(std::move(values));
}

FactorMatrix read_matrix_csv(const std::filesystem::path& path) {
  return parse_matrix_csv(read_file(path), path.string());
}

std::string trace_csv(const std::vector<infer::TraceRow>& trace) {
  std::string out = "iteration,K,log_joint,accepted_adds,accepted_deletes\n";
  for (const auto& row : trace)
    out += fmt::format("{},{},{},{},{}\n", row.iteration, row.K, format_double(row.log_joint),
                       row.accepted_adds, row.accepted_deletes);
  return out;
}

std::string dataset_sidecar_json(const GenerativeModel& model, const std::vector<FactorMatrix>& layers,
                                 std::uint64_t seed) {
  const auto& h = model.hyper;
  json doc;
  doc["seed"] = seed;
  doc["shape"] = {layers.empty() ? 0 : layers.back().rows(), layers.empty() ? 0 : layers.back().cols()};
  doc["hyperparameters"] = {{"alpha_ibp", h.alpha_ibp_per_layer},
                            {"ig_shape", h.ig_shape_per_layer},
                            {"ig_scale", h.ig_scale_per_layer},
                            {"sigma_top", h.sigma_top},
                            {"sigma_floor", h.sigma_floor},
                            {"num_layers", h.num_layers},
                            {"layer_widths", h.layer_widths}};
  // Hidden layers listed from the one next to the data upwards.
  json hidden = json::array();
  json true_k = json::array();
  json active_k = json::array();
  const std::size_t L = model.layers.size();
  for (std::size_t i = 0; i < L; ++i) {
    const WeightLayer& w = model.layers[L - 1 - i];
    const FactorMatrix& y = layers[L - 1 - i];
    true_k.push_back(w.cols());
    active_k.push_back(w.mask.nonempty_columns());
    hidden.push_back({{"layer", i + 1},
                      {"K", w.cols()},
                      {"active_K", w.mask.nonempty_columns()},
                      {"mask", w.mask.row_strings()},
                      {"slab", nested(w.slab)},
                      {"p", w.p_col},
                      {"sigma2", w.sigma2_col},
                      {"factors", nested(y.values())}});
  }
  doc["true_K"] = std::move(true_k);
  doc["active_K"] = std::move(active_k);
  doc["layers"] = std::move(hidden);
  return doc.dump(2) + "\n";
}

std::string state_snapshot_json(const std::vector<infer::LayerRun>& layers, std::uint64_t seed,
                                const std::string& config_json) {
  json doc;
  doc["seed"] = seed;
  doc["config"] = json::parse(config_json);
  json out = json::array();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& run = layers[i];
    const auto& s = run.state;
    auto counter = [](const infer::MoveCounter& c) {
      return json{{"proposed", c.proposed}, {"accepted", c.accepted}};
    };
    out.push_back({{"layer", i + 1},
                   {"K", s.K()},
                   {"K_plus", s.K_plus()},
                   {"log_joint", s.log_joint_cached},
                   {"iterations", run.trace.size()},
                   {"mask", s.weights.mask.row_strings()},
                   {"slab", nested(s.weights.slab)},
                   {"factors", nested(s.Y.values())},
                   {"moves",
                    {{"add", counter(run.stats.add)},
                     {"delete", counter(run.stats.remove)},
                     {"weight", counter(run.stats.weight)},
                     {"factor", counter(run.stats.factor)}}}});
  }
  doc["layers"] = std::move(out);
  return doc.dump(2) + "\n";
}

}  // namespace deepfactor::io
