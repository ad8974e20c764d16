#include "deepfactor/experiment.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "deepfactor/error.hpp"
#include "deepfactor/io.hpp"
#include "deepfactor/version.hpp"

namespace deepfactor::experiment {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (N < 1) throw_invalid("ExperimentConfig: N must be at least 1");
  if (replicates < 1) throw_invalid("ExperimentConfig: replicates must be at least 1");
  if (iterations < 1) throw_invalid("ExperimentConfig: iterations must be at least 1");
  if (K_true.empty()) throw_invalid("ExperimentConfig: K_true range is empty");
  if (inits.empty()) throw_invalid("ExperimentConfig: no initialization strategies");
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw_invalid("ExperimentConfig: burn_in must lie in [0, 1)");
  for (const auto& s : inits)
    if (s.lo > s.hi) throw_invalid("ExperimentConfig: empty init range " + s.spec());
  hyper(K_true.front()).validate();
}

HyperParams ExperimentConfig::hyper(std::size_t k_true) const {
  HyperParams h = HyperParams::single_layer(k_true, priors);
  h.sigma_top = sigma_top;
  h.sigma_floor = sigma_floor;
  return h;
}

const CellStats* SummaryStats::find(std::size_t k_true, std::size_t init_index) const {
  for (const auto& c : cells)
    if (c.K_true == k_true && c.init_index == init_index) return &c;
  return nullptr;
}

std::uint64_t dataset_seed(std::uint64_t base_seed, std::size_t k_true) {
  return mix_seed({base_seed, 0x64617461ULL, k_true});
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t k_true, std::size_t init_index,
                         std::size_t replicate) {
  return mix_seed({base_seed, k_true, init_index, replicate});
}

double point_estimate(const std::vector<infer::TraceRow>& trace, double burn_in) {
  if (trace.empty()) return 0.0;
  std::size_t start = static_cast<std::size_t>(burn_in * static_cast<double>(trace.size()));
  if (start >= trace.size()) start = trace.size() - 1;
  double sum = 0.0;
  for (std::size_t i = start; i < trace.size(); ++i) sum += static_cast<double>(trace[i].K);
  return sum / static_cast<double>(trace.size() - start);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs) {
  cfg.validate();
  ExperimentResult result;

  std::vector<FactorMatrix> data;
  for (std::size_t k : cfg.K_true) {
    const std::uint64_t seed = dataset_seed(cfg.base_seed, k);
    Rng rng(seed);
    const HyperParams h = cfg.hyper(k);
    const GenerativeModel model = sample_model(h, cfg.N, rng);
    auto layers = generate_dataset(model, cfg.T, rng);
    result.datasets.push_back({k, seed, model.layers.back().mask.nonempty_columns()});
    data.push_back(std::move(layers.back()));
  }

  for (std::size_t d = 0; d < cfg.K_true.size(); ++d)
    for (std::size_t i = 0; i < cfg.inits.size(); ++i)
      for (std::size_t r = 0; r < cfg.replicates; ++r) {
        TrialResult t;
        t.K_true = cfg.K_true[d];
        t.init_index = i;
        t.init_label = cfg.inits[i].label();
        t.replicate = r;
        t.seed = trial_seed(cfg.base_seed, t.K_true, i, r);
        result.trials.push_back(std::move(t));
      }

  std::vector<std::size_t> dataset_of(result.trials.size());
  for (std::size_t n = 0; n < result.trials.size(); ++n)
    dataset_of[n] = n / (cfg.inits.size() * cfg.replicates);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t n = next++; n < result.trials.size(); n = next++) {
      try {
        TrialResult& t = result.trials[n];
        infer::InferenceConfig ic;
        ic.iterations = cfg.iterations;
        ic.init = cfg.inits[t.init_index];
        ic.seed = t.seed;
        ic.gibbs_step_scale = cfg.gibbs_step_scale;
        Rng probe(t.seed);
        t.init_K = ic.init.draw(probe);
        const auto start = std::chrono::steady_clock::now();
        infer::LayerRun run = infer::run_mh_layer(data[dataset_of[n]], ic, cfg.hyper(t.K_true));
        t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        t.trace = std::move(run.trace);
        t.K_hat = point_estimate(t.trace, cfg.burn_in);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, result.trials.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  result.summary = summarize(result.trials);
  return result;
}

SummaryStats summarize(const std::vector<TrialResult>& results) {
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const TrialResult*>> groups;
  for (const auto& r : results) groups[{r.K_true, r.init_index}].push_back(&r);
  SummaryStats out;
  for (const auto& [key, members] : groups) {
    CellStats c;
    c.K_true = key.first;
    c.init_index = key.second;
    c.init_label = members.front()->init_label;
    c.count = members.size();
    double sum = 0.0;
    for (const auto* m : members) sum += m->K_hat;
    c.mean = sum / static_cast<double>(c.count);
    double ss = 0.0;
    for (const auto* m : members) ss += (m->K_hat - c.mean) * (m->K_hat - c.mean);
    c.variance = c.count > 1 ? ss / static_cast<double>(c.count - 1) : 0.0;
    out.cells.push_back(std::move(c));
  }
  return out;
}

std::string summary_csv(const SummaryStats& stats) {
  std::string out = "K_true,init_index,init,replicates,mean,variance\n";
  for (const auto& c : stats.cells)
    out += fmt::format("{},{},{},{},{},{}\n", c.K_true, c.init_index, c.init_label, c.count,
                       io::format_double(c.mean), io::format_double(c.variance));
  return out;
}

SummaryStats parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "K_true,init_index,init,replicates,mean,variance")
    throw_parse("summary.csv: unexpected header");
  SummaryStats out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != 6) throw_parse(fmt::format("summary.csv:{}: expected 6 fields", line_no));
    try {
      CellStats c;
      c.K_true = std::stoul(f[0]);
      c.init_index = std::stoul(f[1]);
      c.init_label = f[2];
      c.count = std::stoul(f[3]);
      c.mean = std::stod(f[4]);
      c.variance = std::stod(f[5]);
      out.cells.push_back(std::move(c));
    } catch (const std::logic_error&) {
      throw_parse(fmt::format("summary.csv:{}: malformed number", line_no));
    }
  }
  return out;
}

std::string trace_file_name(std::size_t k_true, std::size_t init_index, std::size_t replicate) {
  return fmt::format("Ktrue{}_init{}_rep{}.csv", k_true, init_index, replicate);
}

void emit_report(const ExperimentResult& result, const ExperimentConfig& cfg, const std::string& config_json,
                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "traces", ec);
  if (ec) throw_io("cannot create " + (dir / "traces").string() + ": " + ec.message());

  json trials = json::array();
  for (const auto& t : result.trials) {
    const std::string name = trace_file_name(t.K_true, t.init_index, t.replicate);
    io::atomic_write(dir / "traces" / name, io::trace_csv(t.trace));
    trials.push_back({{"K_true", t.K_true},
                      {"init_index", t.init_index},
                      {"init", t.init_label},
                      {"replicate", t.replicate},
                      {"seed", t.seed},
                      {"init_K", t.init_K},
                      {"K_hat", t.K_hat},
                      {"seconds", t.seconds},
                      {"trace", "traces/" + name}});
  }
  io::atomic_write(dir / "summary.csv", summary_csv(result.summary));

  json datasets = json::array();
  for (const auto& d : result.datasets)
    datasets.push_back({{"K_true", d.K_true}, {"seed", d.seed}, {"active_K", d.active_K}});
  json inits = json::array();
  for (std::size_t i = 0; i < cfg.inits.size(); ++i)
    inits.push_back({{"index", i}, {"label", cfg.inits[i].label()}, {"spec", cfg.inits[i].spec()}});

  json manifest;
  manifest["format"] = "deepfactor-experiment/1";
  manifest["versions"] = {{"deepfactor", kVersion},
                          {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                                                EIGEN_MINOR_VERSION)},
                          {"fmt", FMT_VERSION},
                          {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                                                        NLOHMANN_JSON_VERSION_MINOR, NLOHMANN_JSON_VERSION_PATCH)}};
  manifest["base_seed"] = cfg.base_seed;
  manifest["config"] = json::parse(config_json);
  manifest["burn_in"] = cfg.burn_in;
  manifest["inits"] = std::move(inits);
  manifest["datasets"] = std::move(datasets);
  manifest["trials"] = std::move(trials);
  manifest["summary"] = "summary.csv";
  io::atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string manifest_problem(const std::string& manifest_text) {
  json m;
  try {
    m = json::parse(manifest_text);
  } catch (const json::parse_error& e) {
    return std::string("not valid JSON: ") + e.what();
  }
  if (!m.is_object()) return "top level is not an object";
  if (m.value("format", "") != "deepfactor-experiment/1") return "format is not deepfactor-experiment/1";
  for (const char* key : {"versions", "config", "base_seed", "burn_in", "inits", "datasets", "trials", "summary"})
    if (!m.contains(key)) return std::string("missing key '") + key + "'";
  if (!m["base_seed"].is_number_unsigned()) return "base_seed is not an unsigned integer";
  if (!m["config"].is_object()) return "config is not an object";
  if (!m["inits"].is_array() || !m["datasets"].is_array() || !m["trials"].is_array())
    return "inits, datasets and trials must be arrays";
  for (const auto& d : m["datasets"])
    for (const char* key : {"K_true", "seed", "active_K"})
      if (!d.contains(key) || !d[key].is_number_unsigned()) return std::string("dataset entry lacks '") + key + "'";
  for (const auto& t : m["trials"]) {
    for (const char* key : {"K_true", "init_index", "replicate", "seed", "init_K"})
      if (!t.contains(key) || !t[key].is_number_unsigned()) return std::string("trial entry lacks '") + key + "'";
    if (!t.contains("K_hat") || !t["K_hat"].is_number()) return "trial entry lacks 'K_hat'";
    if (!t.contains("seconds") || !t["seconds"].is_number()) return "trial entry lacks 'seconds'";
    if (!t.contains("trace") || !t["trace"].is_string()) return "trial entry lacks 'trace'";
  }
  return {};
}

}  // namespace deepfactor::experiment
