#include "gridclear/scenario.hpp"

#include <chrono>
#include <cmath>
#include <ctime>

#include "gridclear/errors.hpp"
#include "gridclear/exports.hpp"
#include "json_util.hpp"

namespace gridclear {

using detail::Json;
using detail::OrderedJson;

std::string to_string(CaseSelector selector) {
  switch (selector) {
    case CaseSelector::A: return "A";
    case CaseSelector::B: return "B";
    case CaseSelector::C: return "C";
    case CaseSelector::TestCase1: return "test-case-1";
    case CaseSelector::TestCase2: return "test-case-2";
  }
  return "?";
}

CaseSelector parse_case(std::string_view text) {
  for (CaseSelector s : {CaseSelector::A, CaseSelector::B, CaseSelector::C, CaseSelector::TestCase1,
                         CaseSelector::TestCase2})
    if (text == to_string(s)) return s;
  throw ConfigError("unknown case '" + std::string(text) + "' (expected A, B, C, test-case-1 or test-case-2)");
}

void ScenarioConfig::validate() const {
  namespace fs = std::filesystem;
  if (feeder.empty()) throw ConfigError("feeder path is required");
  if (!fs::exists(feeder)) throw ConfigError("feeder file not found: " + feeder.string());
  if (ders && generation) throw ConfigError("give either a DER file or a generation spec, not both");
  if (!ders && !generation) throw ConfigError("a DER file or a generation spec is required");
  if (ders && !fs::exists(*ders)) throw ConfigError("DER file not found: " + ders->string());
  if (!std::isfinite(params.network_cost) || params.network_cost < 0.0)
    throw ConfigError("network cost must be a non-negative number");
  if (!(params.period_hours > 0.0) || !std::isfinite(params.period_hours))
    throw ConfigError("period_hours must be positive");
  if (!(params.big_m > 0.0) || !std::isfinite(params.big_m)) throw ConfigError("big_m must be positive");
  if (polygon_edges < 3) throw ConfigError("polygon_edges must be at least 3");
  if (lmp.kind == LmpSource::Kind::Fixed && !std::isfinite(lmp.fixed)) throw ConfigError("lmp must be finite");
  if (lmp.kind == LmpSource::Kind::Affine && !(lmp.slope > 0.0))
    throw ConfigError("affine lmp curve needs a positive slope");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ScenarioConfig parse_scenario(std::string_view document, const std::filesystem::path& base_dir) {
  const Json doc = detail::parse_json(document, "scenario");
  if (!doc.is_object()) throw ConfigError("scenario must be an object");
  detail::expect_schema(doc, kScenarioSchema);
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  ScenarioConfig cfg;
  cfg.feeder = resolve(detail::require_string(doc, "feeder", "scenario"));
  if (doc.contains("ders")) cfg.ders = resolve(detail::require_string(doc, "ders", "scenario"));
  if (auto it = doc.find("generation"); it != doc.end()) cfg.generation = parse_generation_spec(it->dump());

  if (auto it = doc.find("market"); it != doc.end()) {
    cfg.params.network_cost = detail::number_or(*it, "network_cost_cents_per_kwh", cfg.params.network_cost, "market");
    cfg.params.period_hours = detail::number_or(*it, "period_hours", cfg.params.period_hours, "market");
    cfg.params.big_m = detail::number_or(*it, "big_m_cents", cfg.params.big_m, "market");
    cfg.polygon_edges = static_cast<int>(detail::number_or(*it, "polygon_edges", cfg.polygon_edges, "market"));
  }
  if (auto it = doc.find("lmp"); it != doc.end()) {
    if (it->is_number()) {
      cfg.lmp.fixed = it->get<double>();
    } else if (it->contains("affine")) {
      const Json& a = it->at("affine");
      cfg.lmp.kind = LmpSource::Kind::Affine;
      cfg.lmp.intercept = detail::require_number(a, "intercept_cents_per_kwh", "lmp.affine");
      cfg.lmp.slope = detail::require_number(a, "slope_cents_per_kwh_per_kw", "lmp.affine");
    } else {
      cfg.lmp.fixed = detail::require_number(*it, "fixed_cents_per_kwh", "lmp");
    }
  }
  if (doc.contains("case")) cfg.selector = parse_case(detail::require_string(doc, "case", "scenario"));
  if (doc.contains("output_dir")) cfg.output_dir = resolve(detail::require_string(doc, "output_dir", "scenario"));
  else cfg.output_dir = base_dir / cfg.output_dir;
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return parse_scenario(detail::read_text(path), path.parent_path());
}

MarketContext load_market(const ScenarioConfig& config) {
  MarketContext ctx;
  ctx.feeder = FeederModel::build(load_network(config.feeder));
  const Network& net = *ctx.feeder.network;
  ctx.population = std::make_shared<const DerPopulation>(config.ders ? load_ders(net, *config.ders)
                                                                     : generate_population(net, *config.generation));
  ctx.params = config.params;
  ctx.polygon = polygon_coefficients(config.polygon_edges);
  return ctx;
}

namespace {

// Bins for a population of one side, built from its single solve.
Bins one_sided_bins(const DerPopulation& pop, const TdopfSolution& sol, Side side) {
  Bins bins;
  bins.alpha_a.resize(pop.size());
  bins.alpha_b.resize(pop.size());
  bins.alpha_c.resize(pop.size());
  bins.in_mc.assign(pop.size(), false);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const double a = sol.alpha[static_cast<Eigen::Index>(i)];
    (side == Side::Bid ? bins.alpha_a : bins.alpha_b)[i] = a;
    bins.alpha_c[i] = a;
  }
  (side == Side::Bid ? bins.solution_a : bins.solution_b) = sol;
  bins.solution_c = sol;
  return bins;
}

RunResult run_one_sided(const MarketContext& full, Side side, const LmpSource& lmp) {
  MarketContext ctx = full;
  ctx.population = std::make_shared<const DerPopulation>(full.population->filter(side));
  const DerPopulation& pop = *ctx.population;
  const double m = ctx.params.network_cost;

  RunResult run;
  run.selector = side == Side::Bid ? CaseSelector::A : CaseSelector::B;
  run.params = ctx.params;
  run.population = ctx.population;
  const std::string label = side == Side::Bid ? "A" : "B";
  TdopfSolution sol = solve(ctx.problem());
  if (!sol.optimal()) throw BinInfeasibleError(label, sol.infeasibility_hint);
  run.solves.emplace_back(label, sol);

  const Bins bins = one_sided_bins(pop, sol, side);
  run.quotes = make_quotes(pop, bins, m);
  run.curves = aggregate_curves(run.quotes);
  run.outcome = wpm_clear(pop, bins, run.quotes, discover_lmp(run.quotes, lmp), m);
  run.outcome.rectified = true;
  run.qualification = qualification_prices(ctx, sol);
  run.retail = retail_signals(pop, sol, run.outcome, run.qualification, run.outcome.lmp, m);
  run.dispatch = dispatch_check(ctx, run.outcome.final_alpha);
  return run;
}

RunResult run_with_bins(const MarketContext& ctx, CaseSelector selector, const LmpSource& lmp) {
  const DerPopulation& pop = *ctx.population;
  const double m = ctx.params.network_cost;
  RunResult run;
  run.selector = selector;
  run.params = ctx.params;
  run.population = ctx.population;
  Bins bins = build_bins(ctx);
  run.solves = {{"A", bins.solution_a}, {"B", bins.solution_b}, {"C", bins.solution_c}};
  run.qualification = qualification_prices(ctx, bins);

  switch (selector) {
    case CaseSelector::TestCase1: {
      // Everything qualified in the combined solve goes to the market; the
      // price test then drops whichever side the market rejects.
      for (std::size_t i = 0; i < pop.size(); ++i) {
        if (!is_nonzero(bins.alpha_c[i])) continue;
        const Der& der = pop[i];
        run.quotes.push_back({i, der.id, der.side(), der.price + (der.side() == Side::Bid ? -m : m),
                              bins.alpha_c[i] * der.volume});
      }
      run.curves = aggregate_curves(run.quotes);
      const double price = discover_lmp(run.quotes, lmp);
      WpmOutcome& out = run.outcome;
      out.lmp = price;
      out.final_alpha = naive_clearing(pop, bins, price, m);
      for (std::size_t i = 0; i < pop.size(); ++i) {
        const double a = out.final_alpha[static_cast<Eigen::Index>(i)];
        if (a == 0.0) continue;
        (pop[i].side() == Side::Bid ? out.cleared_bids : out.cleared_offers).push_back(i);
        out.scheduled_net_interchange -= a * pop[i].volume;
      }
      out.diagnostic = "combined-solve clearing without ex-post rectification";
      break;
    }
    case CaseSelector::TestCase2: {
      // Quotes forwarded at the DERs' own prices; the markup is charged only
      // at retail.
      const std::vector<IdsoQuote> with_cost = make_quotes(pop, bins, m);
      run.quotes = make_quotes(pop, bins, 0.0);
      run.curves = aggregate_curves(with_cost);
      run.curves_without_cost = aggregate_curves(run.quotes);
      run.outcome = wpm_clear(pop, bins, run.quotes, discover_lmp(run.quotes, lmp), 0.0);
      run.outcome.diagnostic = "quotes exclude the network cost; no ex-post rectification";
      for (std::size_t i : run.outcome.cleared_bids)
        if (cost_recovery(pop[i], run.outcome.lmp, m) > kPriceTolerance) run.mismatched.push_back(i);
      for (std::size_t i : run.outcome.cleared_offers)
        if (cost_recovery(pop[i], run.outcome.lmp, m) > kPriceTolerance) run.mismatched.push_back(i);
      run.retail = retail_signals(pop, bins, run.outcome, run.qualification, run.outcome.lmp, m);
      break;
    }
    default: {
      run.quotes = make_quotes(pop, bins, m);
      run.curves = aggregate_curves(run.quotes);
      WpmOutcome out = wpm_clear(pop, bins, run.quotes, discover_lmp(run.quotes, lmp), m);
      run.outcome = expost_rectify(ctx, bins, std::move(out));
      run.retail = retail_signals(pop, bins, run.outcome, run.qualification, run.outcome.lmp, m);
      break;
    }
  }
  run.dispatch = dispatch_check(ctx, run.outcome.final_alpha);
  run.bins = std::move(bins);
  return run;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const BinInfeasibleError*>(&e)) return ExitCode::Infeasible;
  if (dynamic_cast<const IoError*>(&e)) return ExitCode::Io;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SchemaError*>(&e) ||
      dynamic_cast<const TopologyError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e))
    return ExitCode::Validation;
  return ExitCode::Internal;
}

RunResult run_market(const MarketContext& ctx, CaseSelector selector, const LmpSource& lmp) {
  if (!ctx.population) throw StateError("market context has no population");
  switch (selector) {
    case CaseSelector::A: return run_one_sided(ctx, Side::Bid, lmp);
    case CaseSelector::B: return run_one_sided(ctx, Side::Offer, lmp);
    default: return run_with_bins(ctx, selector, lmp);
  }
}

ScenarioOutcome run_scenario(const ScenarioConfig& config) {
  ScenarioOutcome result;
  std::vector<std::string> files;
  std::string stage = "config";
  try {
    config.validate();
    stage = "load";
    const MarketContext ctx = load_market(config);
    const Network& net = *ctx.feeder.network;
    detail::write_text(config.output_dir / "ders.json", format_ders(net, *ctx.population));
    files.push_back("ders.json");
    stage = "market";
    const RunResult run = run_market(ctx, config.selector, config.lmp);
    stage = "export";
    files = write_exports(net, run, config.output_dir);
    stage = "plot-data";
    for (const std::string& f : emit_plot_data(config.output_dir)) files.push_back(f);
    stage.clear();
  } catch (const std::exception& e) {
    result.code = exit_code_for(e);
    result.failed_stage = stage;
    result.message = e.what();
  }

  OrderedJson manifest;
  manifest["schema"] = "gridclear-manifest/1";
  manifest["case"] = to_string(config.selector);
  manifest["complete"] = result.code == ExitCode::Ok;
  manifest["exit_code"] = static_cast<int>(result.code);
  manifest["failed_stage"] = result.failed_stage;
  manifest["message"] = result.message;
  manifest["files"] = files;
  manifest["created_utc"] = utc_timestamp();
  try {
    detail::write_text(config.output_dir / "manifest.json", detail::dump(manifest));
  } catch (const IoError& e) {
    if (result.code == ExitCode::Ok) {
      result.code = ExitCode::Io;
      result.failed_stage = "manifest";
      result.message = e.what();
    }
  }
  return result;
}

}  // namespace gridclear
