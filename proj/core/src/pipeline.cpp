#include "gridclear/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gridclear/errors.hpp"

namespace gridclear {

TdopfProblem MarketContext::problem(SolveSetup setup) const {
  return TdopfProblem::assemble(feeder, population, params, polygon, std::move(setup));
}

BinInfeasibleError::BinInfeasibleError(std::string bin, std::vector<std::string> hint)
    : Error([&] {
        std::string msg = "bin " + bin + " solve is infeasible";
        if (!hint.empty()) {
          msg += " (binding families:";
          for (const auto& h : hint) msg += " " + h;
          msg += ")";
        }
        return msg;
      }()),
      bin_(std::move(bin)),
      hint_(std::move(hint)) {}

std::vector<std::size_t> Bins::mc_members() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < in_mc.size(); ++i)
    if (in_mc[i]) out.push_back(i);
  return out;
}

namespace {

TdopfSolution solve_bin(const MarketContext& ctx, const std::string& label, std::optional<Side> only) {
  const DerPopulation& pop = *ctx.population;
  SolveSetup setup;
  if (only) {
    setup.clamps.resize(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i)
      if (pop[i].side() != *only) setup.clamps[i] = 0.0;
  }
  TdopfSolution sol = solve(ctx.problem(std::move(setup)));
  if (!sol.optimal()) throw BinInfeasibleError(label, sol.infeasibility_hint);
  return sol;
}

bool passes_price_test(const Der& der, double lmp, double markup) {
  return cost_recovery(der, lmp, markup) <= kPriceTolerance;
}

}  // namespace

Bins build_bins(const MarketContext& ctx) {
  const DerPopulation& pop = *ctx.population;
  Bins bins;
  bins.solution_a = solve_bin(ctx, "A", Side::Bid);
  bins.solution_b = solve_bin(ctx, "B", Side::Offer);
  bins.solution_c = solve_bin(ctx, "C", std::nullopt);

  bins.alpha_a.resize(pop.size());
  bins.alpha_b.resize(pop.size());
  bins.alpha_c.resize(pop.size());
  bins.in_mc.assign(pop.size(), false);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (pop[i].side() == Side::Bid)
      bins.alpha_a[i] = bins.solution_a.alpha[k];
    else
      bins.alpha_b[i] = bins.solution_b.alpha[k];
    bins.alpha_c[i] = bins.solution_c.alpha[k];
    if (std::abs(bins.alpha_c[i] - bins.side_alpha(i)) > kAlphaTolerance) {
      bins.mc_keys.push_back(i);
      bins.in_mc[i] = is_nonzero(bins.alpha_c[i]);
    }
  }
  return bins;
}

std::vector<IdsoQuote> make_quotes(const DerPopulation& population, const Bins& bins, double markup) {
  std::vector<IdsoQuote> quotes;
  for (std::size_t i = 0; i < population.size(); ++i) {
    if (bins.in_mc[i]) continue;
    const double alpha = bins.side_alpha(i);
    if (!is_nonzero(alpha)) continue;
    const Der& der = population[i];
    const double shift = der.side() == Side::Bid ? -markup : markup;
    quotes.push_back({i, der.id, der.side(), der.price + shift, alpha * der.volume});
  }
  return quotes;
}

Curves aggregate_curves(const std::vector<IdsoQuote>& quotes) {
  Curves curves;
  for (const IdsoQuote& q : quotes) {
    CurveStep step{q.id, q.price, std::abs(q.quantity), 0.0};
    (q.side == Side::Bid ? curves.bids : curves.offers).push_back(step);
  }
  // Stable sorts keep input order among equal prices.
  std::stable_sort(curves.bids.begin(), curves.bids.end(),
                   [](const CurveStep& a, const CurveStep& b) { return a.price > b.price; });
  std::stable_sort(curves.offers.begin(), curves.offers.end(),
                   [](const CurveStep& a, const CurveStep& b) { return a.price < b.price; });
  for (auto* side : {&curves.bids, &curves.offers}) {
    double total = 0.0;
    for (CurveStep& s : *side) s.cumulative = (total += s.quantity);
  }
  return curves;
}

double discover_lmp(const std::vector<IdsoQuote>& quotes, const LmpSource& source) {
  if (source.kind == LmpSource::Kind::Fixed) return source.fixed;
  if (!(source.slope > 0.0)) throw ConfigError("affine supply curve needs a positive slope");

  // Net demand at price λ: bids quoting at least λ minus offers quoting at most λ.
  auto demand = [&](double price) {
    double kw = 0.0;
    for (const IdsoQuote& q : quotes) {
      if (q.side == Side::Bid && q.price >= price) kw += std::abs(q.quantity);
      if (q.side == Side::Offer && q.price <= price) kw -= std::abs(q.quantity);
    }
    return kw;
  };
  auto supply_price = [&](double kw) { return source.intercept + source.slope * kw; };

  std::vector<double> breaks;
  for (const IdsoQuote& q : quotes) breaks.push_back(q.price);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  if (breaks.empty()) return supply_price(0.0);

  // Demand is constant between breakpoints and non-increasing in price.
  for (std::size_t k = 0; k <= breaks.size(); ++k) {
    const double lo = k == 0 ? -INFINITY : breaks[k - 1];
    const double hi = k == breaks.size() ? INFINITY : breaks[k];
    const double probe = k == 0 ? breaks.front() - 1.0 : (k == breaks.size() ? breaks.back() + 1.0 : 0.5 * (lo + hi));
    const double price = supply_price(demand(probe));
    if (price > lo && price < hi) return price;
  }
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    const double b = breaks[k];
    const double left = k == 0 ? breaks.front() - 1.0 : 0.5 * (breaks[k - 1] + b);
    const double right = k + 1 == breaks.size() ? breaks.back() + 1.0 : 0.5 * (b + breaks[k + 1]);
    const double high = supply_price(demand(left));
    const double low = supply_price(demand(right));
    if (low <= b && b <= high) return b;
  }
  throw InternalError("no market-clearing price found");
}

double cost_recovery(const Der& der, double lmp, double markup) {
  return der.side() == Side::Offer ? der.price - lmp + markup : -der.price + lmp + markup;
}

WpmOutcome wpm_clear(const DerPopulation& population, const Bins& bins, const std::vector<IdsoQuote>& quotes,
                     double lmp, double markup) {
  WpmOutcome out;
  out.lmp = lmp;
  out.final_alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(population.size()));
  for (const IdsoQuote& q : quotes) {
    const Der& der = population[q.der];
    if (!passes_price_test(der, lmp, markup)) continue;
    const double alpha = bins.side_alpha(q.der);
    out.final_alpha[static_cast<Eigen::Index>(q.der)] = alpha;
    if (q.side == Side::Bid) {
      out.cleared_bids.push_back(q.der);
      out.scheduled_net_interchange += std::abs(q.quantity);
    } else {
      out.cleared_offers.push_back(q.der);
      out.scheduled_net_interchange -= std::abs(q.quantity);
    }
  }
  return out;
}

WpmOutcome expost_rectify(const MarketContext& ctx, const Bins& bins, WpmOutcome outcome) {
  const DerPopulation& pop = *ctx.population;
  outcome.filtered_mc.clear();
  outcome.alpha_hat.clear();
  outcome.cleared_mc.clear();
  for (std::size_t i : bins.mc_members())
    if (passes_price_test(pop[i], outcome.lmp, ctx.params.network_cost)) outcome.filtered_mc.push_back(i);
  if (outcome.filtered_mc.empty()) {
    outcome.rectified = true;
    return outcome;
  }

  SolveSetup setup;
  setup.clamps.assign(pop.size(), 0.0);
  for (std::size_t i : outcome.cleared_bids) setup.clamps[i] = *bins.alpha_a[i];
  for (std::size_t i : outcome.cleared_offers) setup.clamps[i] = *bins.alpha_b[i];
  for (std::size_t i : outcome.filtered_mc) setup.clamps[i].reset();
  setup.zero_net_group = outcome.filtered_mc;

  const TdopfSolution sol = solve(ctx.problem(std::move(setup)));
  if (!sol.optimal()) {
    outcome.rectified = false;
    outcome.diagnostic = "ex-post re-solve infeasible; no mutually contingent DER cleared";
    for (const auto& h : sol.infeasibility_hint) outcome.diagnostic += (h == sol.infeasibility_hint.front() ? " [" : ", ") + h;
    if (!sol.infeasibility_hint.empty()) outcome.diagnostic += "]";
    return outcome;
  }
  for (std::size_t i : outcome.filtered_mc) {
    const double a = sol.alpha[static_cast<Eigen::Index>(i)];
    outcome.alpha_hat.emplace_back(i, a);
    outcome.final_alpha[static_cast<Eigen::Index>(i)] = a;
    if (is_nonzero(a)) outcome.cleared_mc.push_back(i);
  }
  outcome.rectified = true;
  return outcome;
}

DispatchReport dispatch_check(const MarketContext& ctx, const Eigen::VectorXd& alpha) {
  const Network& net = *ctx.feeder.network;
  const NetworkMatrices& m = *ctx.feeder.matrices;
  const DerPopulation& pop = *ctx.population;
  if (alpha.size() != static_cast<Eigen::Index>(pop.size())) throw ShapeError("alpha must have one entry per DER");

  Eigen::VectorXd p = net.fixed_p();
  Eigen::VectorXd q = net.fixed_q();
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const double a = alpha[static_cast<Eigen::Index>(i)];
    if (a == 0.0) continue;
    const int row = 3 * (pop[i].bus - 1);
    p.segment<3>(row) += a * pop.injection(i);
    q.segment<3>(row) += a * pop.eta(i) * pop.injection(i);
  }

  DispatchReport report;
  report.p_flows = accumulate_flows(net, p);
  report.q_flows = accumulate_flows(net, q);
  report.voltages = lindistflow_voltages(m, net.v0(), report.p_flows, report.q_flows);
  const HeadInjection head = head_injection(m, report.p_flows, report.q_flows);
  report.p0 = head.p0;
  report.q0 = head.q0;

  constexpr double tol = 1e-9;
  for (int bus = 1; bus <= net.size(); ++bus) {
    for (Phase ph : kAllPhases) {
      if (!net.buses()[static_cast<std::size_t>(bus)].phases.contains(ph)) continue;
      const double v = report.voltages[3 * (bus - 1) + slot(ph)];
      if (v > net.v_max()[slot(ph)] + tol) report.voltage.push_back({bus, ph, v, net.v_max()[slot(ph)]});
      if (v < net.v_min()[slot(ph)] - tol) report.voltage.push_back({bus, ph, v, net.v_min()[slot(ph)]});
    }
  }
  const Eigen::VectorXd s_max = net.s_max();
  const auto& edges = ctx.polygon.edges;
  for (int k = 0; k < 3 * net.size(); ++k) {
    if (!(s_max[k] > 0.0)) continue;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double lhs = edges[e].beta * report.p_flows[k] + edges[e].delta * report.q_flows[k] + edges[e].gamma * s_max[k];
      if (lhs > tol) report.line.push_back({k / 3, kAllPhases[static_cast<std::size_t>(k % 3)], static_cast<int>(e), lhs});
    }
  }
  for (int ph = 0; ph < 3; ++ph) {
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double lhs = edges[e].beta * report.p0[ph] + edges[e].delta * report.q0[ph] + edges[e].gamma * net.s0_max()[ph];
      if (lhs > tol) report.substation.push_back({ph, kAllPhases[static_cast<std::size_t>(ph)], static_cast<int>(e), lhs});
    }
  }
  return report;
}

Eigen::VectorXd naive_clearing(const DerPopulation& population, const Bins& bins, double lmp, double markup) {
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(population.size()));
  for (std::size_t i = 0; i < population.size(); ++i) {
    if (!is_nonzero(bins.alpha_c[i])) continue;
    if (passes_price_test(population[i], lmp, markup)) alpha[static_cast<Eigen::Index>(i)] = bins.alpha_c[i];
  }
  return alpha;
}

}  // namespace gridclear
