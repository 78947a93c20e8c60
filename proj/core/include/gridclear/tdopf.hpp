#pragma once

// The aggregation LP: choose accepted fractions of every DER's volume to
// maximise net benefit under LinDistFlow voltage, line and substation limits.
//
// Flows are affine in the accepted fractions, so the LP is solved over the
// fractions alone; the power-balance multipliers are recovered afterwards
// from stationarity with respect to the flows.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridclear/der.hpp"
#include "gridclear/lp.hpp"
#include "gridclear/network.hpp"

namespace gridclear {

struct PolygonEdge {
  double beta = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
};

/// Regular polygon inscribed in the circle P² + Q² = S²: edge e is
/// beta·P + delta·Q + gamma·S <= 0.
struct PolygonApprox {
  std::vector<PolygonEdge> edges;
};

/// Throws DomainError when edge_count < 3.
PolygonApprox polygon_coefficients(int edge_count = 12);

struct MarketParams {
  double network_cost = 2.5;  // m, ¢/kWh
  double period_hours = 1.0;  // Δt
  double big_m = 1000.0;      // ¢
};

/// Feeder model shared by every solve of a scenario.
struct FeederModel {
  std::shared_ptr<const Network> network;
  std::shared_ptr<const NetworkMatrices> matrices;

  static FeederModel build(Network network);
};

/// Per-solve modifiers of the base LP.
struct SolveSetup {
  /// Optional fixed value per DER, in [0, 1].
  std::vector<std::optional<double>> clamps;
  /// DERs whose accepted signed volumes must sum to zero.
  std::vector<std::size_t> zero_net_group;
};

/// Role of an LP row, used for diagnostics and multiplier mapping.
enum class RowFamily : std::uint8_t { Voltage, LinePolygon, SubstationPolygon, ZeroNet };

std::string to_string(RowFamily family);

struct RowTag {
  RowFamily family;
  int slot = 0;  // bus-phase (voltage), line-phase (line), phase (substation)
  int edge = 0;  // polygon edge, else 0
};

class TdopfProblem {
 public:
  /// Builds the LP. Throws SchemaError when clamps or groups do not match
  /// the population, DomainError for out-of-range parameters or clamps.
  static TdopfProblem assemble(const FeederModel& feeder, std::shared_ptr<const DerPopulation> population,
                               const MarketParams& params, const PolygonApprox& polygon,
                               SolveSetup setup = {});

  const Network& network() const { return *feeder_.network; }
  const NetworkMatrices& matrices() const { return *feeder_.matrices; }
  const DerPopulation& population() const { return *population_; }
  const MarketParams& params() const { return params_; }
  const PolygonApprox& polygon() const { return polygon_; }
  const SolveSetup& setup() const { return setup_; }
  const lp::Problem& lp() const { return lp_; }
  const std::vector<RowTag>& row_tags() const { return tags_; }
  /// Objective contribution of the fixed loads (¢).
  double objective_offset() const { return offset_; }

  /// Bus-phase slots (0..3N) whose voltage is constrained.
  const std::vector<int>& voltage_slots() const { return voltage_slots_; }

  /// Injection sensitivity: p = p_fixed + inj_p·α, q = q_fixed + inj_q·α.
  const Eigen::MatrixXd& injection_p() const { return inj_p_; }
  const Eigen::MatrixXd& injection_q() const { return inj_q_; }

  /// Bus injections (3N) of a dispatch.
  Eigen::VectorXd injections_p(const Eigen::VectorXd& alpha) const;
  Eigen::VectorXd injections_q(const Eigen::VectorXd& alpha) const;

 private:
  FeederModel feeder_;
  std::shared_ptr<const DerPopulation> population_;
  MarketParams params_;
  PolygonApprox polygon_;
  SolveSetup setup_;
  lp::Problem lp_;
  std::vector<RowTag> tags_;
  std::vector<int> voltage_slots_;
  double offset_ = 0.0;
  Eigen::MatrixXd inj_p_;
  Eigen::MatrixXd inj_q_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded };

std::string to_string(SolveStatus status);

struct TdopfSolution {
  SolveStatus status = SolveStatus::Infeasible;
  Eigen::VectorXd alpha;
  Eigen::VectorXd p_flows;
  Eigen::VectorXd q_flows;
  Eigen::VectorXd voltages;  // squared, p.u.²
  Vec3 p0 = Vec3::Zero();
  Vec3 q0 = Vec3::Zero();
  double objective = 0.0;  // ¢

  Eigen::VectorXd lambda_p;  // ¢/p.u., per bus-phase
  Eigen::VectorXd lambda_q;
  Eigen::VectorXd mu_v_upper;
  Eigen::VectorXd mu_v_lower;
  std::vector<Eigen::VectorXd> mu_line;  // per edge, per line-phase
  std::vector<Vec3> mu_sub;              // per edge
  double mu_zero_net = 0.0;              // free sign
  Eigen::VectorXd nu_upper;              // α <= 1 (or clamp)
  Eigen::VectorXd nu_lower;              // α >= 0 (or clamp)

  /// Row families in the infeasibility certificate.
  std::vector<std::string> infeasibility_hint;
  int iterations = 0;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

/// Runs the LP and maps multipliers onto the Lagrangian
///   obj + λp(p_fixed + p_der − CᵀP) + λq(q_fixed + q_der − CᵀQ)
///       + μv_up(v − v_max) + μv_lo(v_min − v) + Σ_e μline(e)(βP + δQ + γS)
///       + Σ_e μsub(e)(βp0 + δq0 + γS0) + κ·(zero-net row),
/// which makes every inequality multiplier non-negative.
TdopfSolution solve(const TdopfProblem& problem);

struct KktResiduals {
  double stationarity_p = 0.0;      // max |Cλpᵀ − ∇P(rest)|
  double stationarity_q = 0.0;
  double stationarity_alpha = 0.0;  // max |∂L/∂α|
  double complementarity = 0.0;     // max μ·slack, on constraints scaled to unit rows
  double dual_infeasibility = 0.0;  // max(0, −min μ)
  double scale = 1.0;               // largest term magnitude entering the identities

  double scaled_max() const;
};

/// Throws StateError unless the solution is optimal.
KktResiduals kkt_residuals(const TdopfSolution& solution, const TdopfProblem& problem);

/// Qualification price from the multipliers at the DER's bus (¢/kWh).
double qualification_price(const Der& der, const Vec3& lambda_p_bus, const Vec3& lambda_q_bus,
                           double big_m, double s_base_kva, double period_hours);

/// Same, selecting the DER's bus block from full 3N multiplier vectors.
double qualification_price(const Der& der, const Eigen::VectorXd& lambda_p, const Eigen::VectorXd& lambda_q,
                           double big_m, double s_base_kva, double period_hours);

/// Threshold for treating an accepted fraction as nonzero.
inline constexpr double kAlphaTolerance = 1e-6;

inline bool is_nonzero(double alpha) { return std::abs(alpha) > kAlphaTolerance; }

}  // namespace gridclear
