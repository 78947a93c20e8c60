#pragma once

// Bins, quotes, wholesale clearing stub, ex-post rectification and dispatch
// checks for populations holding bids, offers, or both.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridclear/der.hpp"
#include "gridclear/errors.hpp"
#include "gridclear/tdopf.hpp"

namespace gridclear {

/// Shared inputs of every solve in one scenario.
struct MarketContext {
  FeederModel feeder;
  std::shared_ptr<const DerPopulation> population;
  MarketParams params;
  PolygonApprox polygon = polygon_coefficients(12);

  TdopfProblem problem(SolveSetup setup = {}) const;
};

/// Raised when a bin solve is infeasible; carries the bin label.
class BinInfeasibleError : public Error {
 public:
  BinInfeasibleError(std::string bin, std::vector<std::string> hint);
  const std::string& bin() const { return bin_; }
  const std::vector<std::string>& hint() const { return hint_; }

 private:
  std::string bin_;
  std::vector<std::string> hint_;
};

struct Bins {
  /// Set for bids only / offers only; every DER has an α_C.
  std::vector<std::optional<double>> alpha_a;
  std::vector<std::optional<double>> alpha_b;
  std::vector<double> alpha_c;
  /// DERs whose combined-solve fraction differs from their side-only solve.
  std::vector<std::size_t> mc_keys;
  /// Mutually contingent DERs: keys with a nonzero combined fraction.
  std::vector<bool> in_mc;

  TdopfSolution solution_a;
  TdopfSolution solution_b;
  TdopfSolution solution_c;

  /// α from the DER's own side bin.
  double side_alpha(std::size_t i) const { return alpha_a[i] ? *alpha_a[i] : alpha_b[i].value_or(0.0); }
  std::vector<std::size_t> mc_members() const;
};

/// Solves the bids-only, offers-only and combined problems.
/// Throws BinInfeasibleError naming the bin.
Bins build_bins(const MarketContext& ctx);

struct IdsoQuote {
  std::size_t der = 0;
  std::string id;
  Side side = Side::Bid;
  double price = 0.0;     // ¢/kWh
  double quantity = 0.0;  // kW, signed like the DER volume
};

/// One quote per DER qualified in its side bin, mutually contingent DERs
/// excluded. Bids quote π − markup, offers π + markup.
std::vector<IdsoQuote> make_quotes(const DerPopulation& population, const Bins& bins, double markup);

struct CurveStep {
  std::string id;
  double price = 0.0;
  double quantity = 0.0;    // kW, magnitude
  double cumulative = 0.0;  // kW
};

struct Curves {
  std::vector<CurveStep> bids;    // descending price
  std::vector<CurveStep> offers;  // ascending price
};

Curves aggregate_curves(const std::vector<IdsoQuote>& quotes);

/// Fixed wholesale price, or lmp = intercept + slope·(net demand kW)
/// intersected with the aggregated quotes.
struct LmpSource {
  enum class Kind { Fixed, Affine } kind = Kind::Fixed;
  double fixed = 13.0;
  double intercept = 0.0;
  double slope = 0.0;
};

/// Price at which the aggregated quotes meet the supply curve.
double discover_lmp(const std::vector<IdsoQuote>& quotes, const LmpSource& source);

struct WpmOutcome {
  double lmp = 0.0;
  std::vector<std::size_t> cleared_bids;
  std::vector<std::size_t> cleared_offers;
  std::vector<std::size_t> cleared_mc;
  double scheduled_net_interchange = 0.0;  // kW, positive for net withdrawal

  /// Accepted fraction per DER in the final dispatch.
  Eigen::VectorXd final_alpha;
  /// Ex-post fractions of the mutually contingent DERs that passed the cost test.
  std::vector<std::pair<std::size_t, double>> alpha_hat;
  std::vector<std::size_t> filtered_mc;  // contingent DERs passing the cost test
  bool rectified = false;
  std::string diagnostic;
};

/// Price tests on original DER prices against lmp ± markup; ties clear.
WpmOutcome wpm_clear(const DerPopulation& population, const Bins& bins, const std::vector<IdsoQuote>& quotes,
                     double lmp, double markup);

/// Cost-recovery indicator: offers π − lmp + m, bids −π + lmp + m; passes when <= 0.
double cost_recovery(const Der& der, double lmp, double markup);

/// Tolerance for price comparisons (¢/kWh).
inline constexpr double kPriceTolerance = 1e-9;

/// Re-solves with cleared DERs fixed at their bin fractions, cost-recovering
/// mutually contingent DERs free under a zero-net constraint, and all others
/// at zero. On an infeasible re-solve returns the outcome without ex-post
/// clearing and records a diagnostic.
WpmOutcome expost_rectify(const MarketContext& ctx, const Bins& bins, WpmOutcome outcome);

struct VoltageViolation {
  int bus = 0;
  Phase phase = Phase::A;
  double v = 0.0;      // squared p.u.
  double limit = 0.0;  // violated bound
};

struct PolygonViolation {
  int line_or_phase = 0;  // line index, or phase slot for the substation
  Phase phase = Phase::A;
  int edge = 0;
  double excess = 0.0;    // p.u. beyond the edge
};

struct DispatchReport {
  Eigen::VectorXd p_flows;
  Eigen::VectorXd q_flows;
  Eigen::VectorXd voltages;
  Vec3 p0 = Vec3::Zero();
  Vec3 q0 = Vec3::Zero();
  std::vector<VoltageViolation> voltage;
  std::vector<PolygonViolation> line;
  std::vector<PolygonViolation> substation;

  std::size_t violation_count() const { return voltage.size() + line.size() + substation.size(); }
};

/// Accumulates flows over the tree for the given accepted fractions and
/// reports every bound or polygon breach beyond 1e-9.
DispatchReport dispatch_check(const MarketContext& ctx, const Eigen::VectorXd& alpha);

/// Fractions for clearing the combined-bin qualified set and then dropping
/// every DER the wholesale price test rejects.
Eigen::VectorXd naive_clearing(const DerPopulation& population, const Bins& bins, double lmp, double markup);

}  // namespace gridclear
