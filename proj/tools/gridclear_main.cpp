// gridclear: run market scenarios, generate DER populations, check feeders.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "gridclear/errors.hpp"
#include "gridclear/exports.hpp"
#include "gridclear/scenario.hpp"

namespace gc = gridclear;

namespace {

struct RunOverrides {
  std::optional<std::string> selector;
  std::optional<double> lmp;
  std::optional<double> network_cost;
  std::optional<double> period_hours;
  std::optional<double> big_m;
  std::optional<int> polygon_edges;
  std::optional<std::string> output_dir;
  std::optional<std::string> ders;
  std::optional<std::uint64_t> seed;
};

void apply(const RunOverrides& o, gc::ScenarioConfig& cfg) {
  if (o.selector) cfg.selector = gc::parse_case(*o.selector);
  if (o.lmp) cfg.lmp = gc::LmpSource{gc::LmpSource::Kind::Fixed, *o.lmp, 0.0, 0.0};
  if (o.network_cost) cfg.params.network_cost = *o.network_cost;
  if (o.period_hours) cfg.params.period_hours = *o.period_hours;
  if (o.big_m) cfg.params.big_m = *o.big_m;
  if (o.polygon_edges) cfg.polygon_edges = *o.polygon_edges;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.ders) {
    cfg.ders = std::filesystem::path(*o.ders);
    cfg.generation.reset();
  }
  if (o.seed) {
    if (!cfg.generation) throw gc::ConfigError("--seed needs a generation block in the config");
    cfg.generation->seed = *o.seed;
  }
}

int report(const std::string& what, const std::exception& e) {
  std::cerr << what << ": " << e.what() << "\n";
  return static_cast<int>(gc::exit_code_for(e));
}

int run_configs(const std::vector<std::string>& paths, const RunOverrides& overrides, int jobs) {
  if (overrides.output_dir && paths.size() > 1) {
    std::cerr << "--output-dir applies to a single config\n";
    return static_cast<int>(gc::ExitCode::Validation);
  }
  std::vector<int> codes(paths.size(), 0);
  std::mutex log;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < paths.size(); k = next++) {
      int code = 0;
      std::string line;
      try {
        gc::ScenarioConfig cfg = gc::load_scenario(paths[k]);
        apply(overrides, cfg);
        const gc::ScenarioOutcome out = gc::run_scenario(cfg);
        code = static_cast<int>(out.code);
        line = out.code == gc::ExitCode::Ok ? paths[k] + ": ok -> " + cfg.output_dir.string()
                                            : paths[k] + ": failed at " + out.failed_stage + ": " + out.message;
      } catch (const std::exception& e) {
        code = static_cast<int>(gc::exit_code_for(e));
        line = paths[k] + ": " + e.what();
      }
      codes[k] = code;
      std::lock_guard lock(log);
      (code == 0 ? std::cout : std::cerr) << line << "\n";
    }
  };
  const int n = std::clamp(jobs, 1, static_cast<int>(paths.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (int c : codes)
    if (c != 0) return c;
  return 0;
}

int check_feeder(const std::string& path) {
  try {
    const gc::FeederModel model = gc::FeederModel::build(gc::load_network(path));
    const gc::Network& net = *model.network;
    const auto [kw, kvar] = gc::total_fixed_load(net);
    const Eigen::VectorXd p = gc::accumulate_flows(net, net.fixed_p());
    const Eigen::VectorXd q = gc::accumulate_flows(net, net.fixed_q());
    const Eigen::VectorXd v = gc::lindistflow_voltages(*model.matrices, net.v0(), p, q);
    double lo = INFINITY, hi = -INFINITY;
    for (int bus = 1; bus <= net.size(); ++bus)
      for (gc::Phase ph : gc::kAllPhases)
        if (net.buses()[static_cast<std::size_t>(bus)].phases.contains(ph)) {
          const double x = std::sqrt(v[3 * (bus - 1) + gc::slot(ph)]);
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
    std::printf("buses %d (plus head %s), lines %d\n", net.size(), net.buses()[0].label.c_str(), net.size());
    std::printf("fixed load %.1f kW, %.1f kVAr\n", kw, kvar);
    if (net.size() > 0) std::printf("no-DER voltage range %.4f .. %.4f p.u.\n", lo, hi);
    return 0;
  } catch (const std::exception& e) {
    return report(path, e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-safe DER aggregation and retail pricing for a three-phase distribution feeder"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  RunOverrides ov;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "Run one or more scenario configs");
  run->add_option("config", configs, "Scenario config files")->required()->check(CLI::ExistingFile);
  run->add_option("-j,--jobs", jobs, "Configs run in parallel")->check(CLI::PositiveNumber);
  run->add_option("--case", ov.selector, "A, B, C, test-case-1 or test-case-2");
  run->add_option("--lmp", ov.lmp, "Fixed wholesale price, cents/kWh");
  run->add_option("--network-cost", ov.network_cost, "Network cost markup, cents/kWh");
  run->add_option("--period-hours", ov.period_hours, "Operating period length, hours");
  run->add_option("--big-m", ov.big_m, "Offer preference constant, cents");
  run->add_option("--polygon-edges", ov.polygon_edges, "Edges of the apparent-power polygon");
  run->add_option("-o,--output-dir", ov.output_dir, "Output directory");
  run->add_option("--ders", ov.ders, "DER file, replacing the config's population");
  run->add_option("--seed", ov.seed, "Generation seed");

  std::string spec_path, feeder_path, out_path;
  auto* gen = app.add_subcommand("generate-ders", "Sample a DER population from a generation spec");
  gen->add_option("spec", spec_path, "Generation spec")->required()->check(CLI::ExistingFile);
  gen->add_option("-f,--feeder", feeder_path, "Feeder the DERs attach to")->required()->check(CLI::ExistingFile);
  gen->add_option("-o,--output", out_path, "DER file to write")->required();

  std::string check_path;
  auto* check = app.add_subcommand("check", "Validate a feeder and print a summary");
  check->add_option("feeder", check_path, "Feeder file")->required();

  std::string run_dir;
  auto* plot = app.add_subcommand("plot-data", "Write CSV series from a run directory");
  plot->add_option("run-dir", run_dir, "Directory holding the run exports")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(gc::ExitCode::Validation);
  }

  if (*run) return run_configs(configs, ov, jobs);
  if (*gen) {
    try {
      const gc::Network net = gc::load_network(feeder_path);
      std::ifstream in(spec_path);
      std::stringstream text;
      text << in.rdbuf();
      const gc::DerPopulation pop = gc::generate_population(net, gc::parse_generation_spec(text.str()));
      gc::save_ders(net, pop, out_path);
      std::printf("%zu DERs -> %s\n", pop.size(), out_path.c_str());
      return 0;
    } catch (const std::exception& e) {
      return report(spec_path, e);
    }
  }
  if (*check) return check_feeder(check_path);
  if (*plot) {
    try {
      for (const std::string& f : gc::emit_plot_data(run_dir)) std::printf("%s\n", (std::filesystem::path(run_dir) / f).c_str());
      return 0;
    } catch (const std::exception& e) {
      return report(run_dir, e);
    }
  }
  return 0;
}
