#include "deepfactor/config.hpp"

#include <charconv>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "deepfactor/error.hpp"
#include "deepfactor/io.hpp"

namespace deepfactor::config {

using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw_parse(path + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw_parse(fmt::format("{}: unknown key '{}'", path, key));
}

double get_real(const json& j, const std::string& path) {
  if (!j.is_number()) throw_parse(path + ": expected a number");
  return j.get<double>();
}

std::size_t get_count(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw_parse(path + ": expected a non-negative integer");
  return j.get<std::size_t>();
}

std::vector<std::size_t> get_counts(const json& j, const std::string& path) {
  if (!j.is_array()) throw_parse(path + ": expected an array of integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_count(j[i], fmt::format("{}[{}]", path, i)));
  return out;
}

// A scalar applies to every layer; an array gives one value per layer.
std::vector<double> get_per_layer(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw_parse(path + ": expected a number or an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_real(j[i], fmt::format("{}[{}]", path, i)));
  return out;
}

std::size_t parse_size(std::string_view s, std::string_view whole) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw_parse(fmt::format("init '{}': '{}' is not a non-negative integer", whole, s));
  return v;
}

template <typename F>
void guarded(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw_parse(e.what());
    throw;
  }
}

}  // namespace

infer::InitStrategy parse_init(std::string_view spec) {
  const std::size_t colon = spec.find(':');
  const std::string_view kind = spec.substr(0, colon);
  if (colon == std::string_view::npos)
    throw_parse(fmt::format("init '{}': expected fixed:K or uniform:LO:HI", spec));
  const std::string_view rest = spec.substr(colon + 1);
  if (kind == "fixed") return infer::InitStrategy::fixed(parse_size(rest, spec));
  if (kind == "uniform") {
    const std::size_t colon2 = rest.find(':');
    if (colon2 == std::string_view::npos) throw_parse(fmt::format("init '{}': expected uniform:LO:HI", spec));
    const std::size_t lo = parse_size(rest.substr(0, colon2), spec);
    const std::size_t hi = parse_size(rest.substr(colon2 + 1), spec);
    if (lo > hi) throw_parse(fmt::format("init '{}': empty range", spec));
    return infer::InitStrategy::uniform(lo, hi);
  }
  throw_parse(fmt::format("init '{}': unknown strategy '{}'", spec, kind));
}

RunConfig parse_run_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw_parse(std::string("config is not valid JSON: ") + e.what());
  }
  expect_object(doc, "config", {"seed", "data", "model", "inference", "experiment"});
  RunConfig cfg;

  try {
    if (doc.contains("seed")) {
      if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0))
        throw_parse("seed: expected a non-negative integer");
      cfg.seed = doc["seed"].get<std::uint64_t>();
    }

    if (doc.contains("data")) {
      const json& d = doc["data"];
      expect_object(d, "data", {"N", "T"});
      if (d.contains("N")) cfg.N = get_count(d["N"], "data.N");
      if (d.contains("T")) cfg.T = get_count(d["T"], "data.T");
    }

    if (doc.contains("model")) {
      const json& m = doc["model"];
      expect_object(m, "model", {"num_layers", "layer_widths", "alpha_ibp", "ig_shape", "ig_scale", "sigma_top",
                                 "sigma_floor"});
      auto& h = cfg.hyper;
      if (m.contains("layer_widths")) {
        h.layer_widths = get_counts(m["layer_widths"], "model.layer_widths");
        h.num_layers = h.layer_widths.size();
      }
      if (m.contains("num_layers")) h.num_layers = get_count(m["num_layers"], "model.num_layers");
      if (m.contains("alpha_ibp")) h.alpha_ibp_per_layer = get_per_layer(m["alpha_ibp"], "model.alpha_ibp");
      if (m.contains("ig_shape")) h.ig_shape_per_layer = get_per_layer(m["ig_shape"], "model.ig_shape");
      if (m.contains("ig_scale")) h.ig_scale_per_layer = get_per_layer(m["ig_scale"], "model.ig_scale");
      if (m.contains("sigma_top")) h.sigma_top = get_real(m["sigma_top"], "model.sigma_top");
      if (m.contains("sigma_floor")) h.sigma_floor = get_real(m["sigma_floor"], "model.sigma_floor");
      for (auto* v : {&h.alpha_ibp_per_layer, &h.ig_shape_per_layer, &h.ig_scale_per_layer})
        if (v->size() == 1 && h.num_layers > 1) v->assign(h.num_layers, v->front());
    }

    if (doc.contains("inference")) {
      const json& i = doc["inference"];
      expect_object(i, "inference", {"iterations", "init", "gibbs_step_scale", "layerwise_outer_loops", "tolerance",
                                     "add_bootstrap", "depth"});
      auto& ic = cfg.inference;
      if (i.contains("iterations")) ic.iterations = get_count(i["iterations"], "inference.iterations");
      if (i.contains("init")) {
        if (!i["init"].is_string()) throw_parse("inference.init: expected a string such as \"fixed:2\"");
        ic.init = parse_init(i["init"].get<std::string>());
      }
      if (i.contains("gibbs_step_scale"))
        ic.gibbs_step_scale = get_real(i["gibbs_step_scale"], "inference.gibbs_step_scale");
      if (i.contains("layerwise_outer_loops"))
        ic.layerwise_outer_loops = get_count(i["layerwise_outer_loops"], "inference.layerwise_outer_loops");
      if (i.contains("tolerance")) ic.tolerance = get_real(i["tolerance"], "inference.tolerance");
      if (i.contains("add_bootstrap")) ic.add_bootstrap = get_real(i["add_bootstrap"], "inference.add_bootstrap");
      if (i.contains("depth")) cfg.depth = get_count(i["depth"], "inference.depth");
    }

    if (doc.contains("experiment")) {
      const json& e = doc["experiment"];
      expect_object(e, "experiment", {"K_true", "inits", "iterations", "replicates", "burn_in"});
      auto& ec = cfg.experiment;
      if (e.contains("K_true")) ec.K_true = get_counts(e["K_true"], "experiment.K_true");
      if (e.contains("inits")) {
        if (!e["inits"].is_array()) throw_parse("experiment.inits: expected an array of strings");
        ec.inits.clear();
        for (const auto& s : e["inits"]) {
          if (!s.is_string()) throw_parse("experiment.inits: expected an array of strings");
          ec.inits.push_back(parse_init(s.get<std::string>()));
        }
      }
      if (e.contains("iterations")) ec.iterations = get_count(e["iterations"], "experiment.iterations");
      if (e.contains("replicates")) ec.replicates = get_count(e["replicates"], "experiment.replicates");
      if (e.contains("burn_in")) ec.burn_in = get_real(e["burn_in"], "experiment.burn_in");
    }
  } catch (const json::exception& e) {
    throw_parse(std::string("config: ") + e.what());
  }

  // The experiment shares the data shape and first-layer priors.
  auto& ec = cfg.experiment;
  ec.N = cfg.N;
  ec.T = cfg.T;
  ec.priors = {cfg.hyper.alpha_ibp_per_layer.empty() ? 3.0 : cfg.hyper.alpha_ibp_per_layer.front(),
               cfg.hyper.ig_shape_per_layer.empty() ? 2.0 : cfg.hyper.ig_shape_per_layer.front(),
               cfg.hyper.ig_scale_per_layer.empty() ? 1.0 : cfg.hyper.ig_scale_per_layer.front()};
  ec.sigma_top = cfg.hyper.sigma_top;
  ec.sigma_floor = cfg.hyper.sigma_floor;
  ec.gibbs_step_scale = cfg.inference.gibbs_step_scale;

  guarded([&] {
    if (cfg.N < 1) throw_invalid("data.N must be at least 1");
    if (cfg.depth < 1) throw_invalid("inference.depth must be at least 1");
    cfg.hyper.validate();
    cfg.inference.validate();
    ec.validate();
  });
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  try {
    return parse_run_config(text);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) throw_parse(path.string() + ": " + e.what());
    throw;
  }
}

std::string to_json(const RunConfig& cfg) {
  json doc;
  if (cfg.seed) doc["seed"] = *cfg.seed;
  doc["data"] = {{"N", cfg.N}, {"T", cfg.T}};
  const auto& h = cfg.hyper;
  doc["model"] = {{"num_layers", h.num_layers},
                  {"layer_widths", h.layer_widths},
                  {"alpha_ibp", h.alpha_ibp_per_layer},
                  {"ig_shape", h.ig_shape_per_layer},
                  {"ig_scale", h.ig_scale_per_layer},
                  {"sigma_top", h.sigma_top},
                  {"sigma_floor", h.sigma_floor}};
  const auto& i = cfg.inference;
  doc["inference"] = {{"iterations", i.iterations},
                      {"init", i.init.spec()},
                      {"gibbs_step_scale", i.gibbs_step_scale},
                      {"layerwise_outer_loops", i.layerwise_outer_loops},
                      {"tolerance", i.tolerance},
                      {"add_bootstrap", i.add_bootstrap},
                      {"depth", cfg.depth}};
  const auto& e = cfg.experiment;
  json inits = json::array();
  for (const auto& s : e.inits) inits.push_back(s.spec());
  doc["experiment"] = {{"K_true", e.K_true},
                       {"inits", inits},
                       {"iterations", e.iterations},
                       {"replicates", e.replicates},
                       {"burn_in", e.burn_in}};
  return doc.dump(2) + "\n";
}

}  // namespace deepfactor::config
