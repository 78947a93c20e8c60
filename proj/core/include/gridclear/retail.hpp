#pragma once

// Differential retail signals: qualified DERs pay or earn the wholesale
// price plus or minus the network markup; the rest receive the price that
// would have qualified them.

#include <string>
#include <vector>

#include "gridclear/pipeline.hpp"

namespace gridclear {

struct RetailSignal {
  std::size_t der = 0;
  std::string id;
  Side side = Side::Bid;
  bool qualified = false;
  bool cleared = false;  // dispatched in the final outcome
  double price = 0.0;                // ¢/kWh, may be negative
  double quantity = 0.0;             // kW, signed like the DER volume
  double qualification_price = 0.0;  // ¢/kWh
};

/// Qualification price of every DER: bids from the bids-only bin
/// multipliers, offers from the offers-only bin.
std::vector<double> qualification_prices(const MarketContext& ctx, const Bins& bins);

/// Qualification prices from a single solve (populations of one side).
std::vector<double> qualification_prices(const MarketContext& ctx, const TdopfSolution& solution);

/// Classifies each DER and prices it. A DER is qualified when its side-bin
/// fraction is nonzero and it is not mutually contingent, when ex-post
/// clearing accepted it, or when it is mutually contingent with a nonzero
/// side-bin fraction and passes the wholesale price test.
/// Throws StateError if `qualification` does not cover the population.
std::vector<RetailSignal> retail_signals(const DerPopulation& population, const Bins& bins,
                                         const WpmOutcome& outcome, const std::vector<double>& qualification,
                                         double lmp, double markup);

/// Single-solve variant: qualified means a nonzero fraction in `solution`.
std::vector<RetailSignal> retail_signals(const DerPopulation& population, const TdopfSolution& solution,
                                         const WpmOutcome& outcome, const std::vector<double>& qualification,
                                         double lmp, double markup);

}  // namespace gridclear
