#include "gridclear/retail.hpp"

#include <algorithm>
#include <set>

#include "gridclear/errors.hpp"

namespace gridclear {

std::vector<double> qualification_prices(const MarketContext& ctx, const Bins& bins) {
  const DerPopulation& pop = *ctx.population;
  const double s_base = ctx.feeder.network->s_base_kva();
  std::vector<double> out(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const TdopfSolution& sol = pop[i].side() == Side::Bid ? bins.solution_a : bins.solution_b;
    out[i] = qualification_price(pop[i], sol.lambda_p, sol.lambda_q, ctx.params.big_m, s_base,
                                 ctx.params.period_hours);
  }
  return out;
}

std::vector<double> qualification_prices(const MarketContext& ctx, const TdopfSolution& solution) {
  const DerPopulation& pop = *ctx.population;
  const double s_base = ctx.feeder.network->s_base_kva();
  std::vector<double> out(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i)
    out[i] = qualification_price(pop[i], solution.lambda_p, solution.lambda_q, ctx.params.big_m, s_base,
                                 ctx.params.period_hours);
  return out;
}

namespace {

struct Classified {
  bool qualified = false;
  bool cleared = false;
  double alpha = 0.0;
};

RetailSignal price_signal(const Der& der, std::size_t index, const Classified& c, double qp, double lmp,
                          double markup) {
  RetailSignal s;
  s.der = index;
  s.id = der.id;
  s.side = der.side();
  s.qualified = c.qualified;
  s.cleared = c.cleared;
  s.qualification_price = qp;
  const double uniform = der.side() == Side::Bid ? lmp + markup : lmp - markup;
  if (c.qualified) {
    s.price = uniform;
    s.quantity = c.alpha * der.volume;
  } else {
    s.price = der.side() == Side::Bid ? std::max(uniform, qp) : std::min(uniform, qp);
    s.quantity = 0.0;
  }
  return s;
}

std::set<std::size_t> cleared_set(const WpmOutcome& outcome) {
  std::set<std::size_t> out(outcome.cleared_bids.begin(), outcome.cleared_bids.end());
  out.insert(outcome.cleared_offers.begin(), outcome.cleared_offers.end());
  out.insert(outcome.cleared_mc.begin(), outcome.cleared_mc.end());
  return out;
}

void check_coverage(const DerPopulation& population, const std::vector<double>& qualification) {
  if (qualification.size() != population.size())
    throw StateError("qualification prices missing for " +
                     std::to_string(population.size() - std::min(population.size(), qualification.size())) +
                     " DERs");
}

}  // namespace

std::vector<RetailSignal> retail_signals(const DerPopulation& population, const Bins& bins,
                                         const WpmOutcome& outcome, const std::vector<double>& qualification,
                                         double lmp, double markup) {
  check_coverage(population, qualification);
  const std::set<std::size_t> cleared = cleared_set(outcome);
  std::vector<double> hat(population.size(), 0.0);
  for (const auto& [i, a] : outcome.alpha_hat) hat[i] = a;

  std::vector<RetailSignal> out;
  out.reserve(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) {
    const Der& der = population[i];
    const double side_alpha = bins.side_alpha(i);
    Classified c;
    c.cleared = cleared.count(i) > 0;
    if (!bins.in_mc[i]) {
      c.qualified = is_nonzero(side_alpha);
      c.alpha = side_alpha;
    } else if (is_nonzero(hat[i])) {
      c.qualified = true;
      c.alpha = hat[i];
    } else if (is_nonzero(side_alpha) && cost_recovery(der, lmp, markup) <= kPriceTolerance) {
      c.qualified = true;
      c.alpha = side_alpha;
    }
    out.push_back(price_signal(der, i, c, qualification[i], lmp, markup));
  }
  return out;
}

std::vector<RetailSignal> retail_signals(const DerPopulation& population, const TdopfSolution& solution,
                                         const WpmOutcome& outcome, const std::vector<double>& qualification,
                                         double lmp, double markup) {
  check_coverage(population, qualification);
  const std::set<std::size_t> cleared = cleared_set(outcome);
  std::vector<RetailSignal> out;
  out.reserve(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) {
    Classified c;
    c.alpha = solution.alpha[static_cast<Eigen::Index>(i)];
    c.qualified = is_nonzero(c.alpha);
    c.cleared = cleared.count(i) > 0;
    out.push_back(price_signal(population[i], i, c, qualification[i], lmp, markup));
  }
  return out;
}

}  // namespace gridclear
