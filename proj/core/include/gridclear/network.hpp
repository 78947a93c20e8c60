#pragma once

// Three-phase unbalanced radial feeder and its matrix LinDistFlow model.
//
// Layout conventions used throughout the library:
//   * bus 0 is the head (substation) bus; buses 1..N are non-head buses;
//   * line k (0-based) feeds bus k + 1 and is oriented parent -> child;
//   * 3N vectors are blocked by non-head bus or by line, phases a, b, c
//     inside each block;
//   * every quantity is per unit on the feeder's s_base.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridclear/phase.hpp"

namespace gridclear {

struct Bus {
  int index = 0;
  std::string label;
  bool is_head = false;
  PhaseSet phases = PhaseSet::all();
  Vec3 fixed_injection_p = Vec3::Zero();  // p.u., consumption negative
  Vec3 fixed_injection_q = Vec3::Zero();
};

struct Line {
  int from_bus = 0;
  int to_bus = 0;
  PhaseSet phases = PhaseSet::all();
  Mat3 r_matrix = Mat3::Zero();  // p.u.
  Mat3 x_matrix = Mat3::Zero();
  Vec3 s_max = Vec3::Zero();     // p.u.; zero on absent phases
};

/// Per-unit operating limits shared by every bus.
struct FeederLimits {
  Vec3 v0 = Vec3::Constant(1.0);     // squared head voltage
  Vec3 v_min = Vec3::Constant(0.95 * 0.95);
  Vec3 v_max = Vec3::Constant(1.05 * 1.05);
  Vec3 s0_max = Vec3::Constant(5.0);  // substation limit per phase
  double s_base_kva = 1000.0;
  double v_base_kv = 2.401;
};

/// Validated radial feeder. Immutable after construction.
class Network {
 public:
  /// Validates the tree, orients every line parent -> child and stores the
  /// line feeding bus i at position i - 1. Throws TopologyError or SchemaError.
  Network(FeederLimits limits, std::vector<Bus> buses, std::vector<Line> lines);

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const FeederLimits& limits() const { return limits_; }

  /// Number of non-head buses (and lines).
  int size() const { return static_cast<int>(lines_.size()); }

  const Vec3& v0() const { return limits_.v0; }
  const Vec3& v_min() const { return limits_.v_min; }
  const Vec3& v_max() const { return limits_.v_max; }
  const Vec3& s0_max() const { return limits_.s0_max; }
  double s_base_kva() const { return limits_.s_base_kva; }
  double v_base_kv() const { return limits_.v_base_kv; }

  int parent(int bus) const { return parent_.at(static_cast<std::size_t>(bus)); }
  const std::vector<int>& children(int bus) const { return children_.at(static_cast<std::size_t>(bus)); }
  /// Line feeding a non-head bus.
  int line_into(int bus) const { return bus - 1; }
  /// Buses ordered so that each parent precedes its children.
  const std::vector<int>& topological_order() const { return order_; }

  /// Fixed injections stacked over buses 1..N.
  Eigen::VectorXd fixed_p() const;
  Eigen::VectorXd fixed_q() const;
  /// Apparent power limits stacked over lines.
  Eigen::VectorXd s_max() const;

  /// Index of the bus with the given label, if any.
  std::optional<int> find_label(std::string_view label) const;

 private:
  FeederLimits limits_;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<int> order_;
};

/// Incidence and impedance blocks of the matrix LinDistFlow model.
struct NetworkMatrices {
  Eigen::MatrixXd c0;     // 3N x 3
  Eigen::MatrixXd c;      // 3N x 3N, rows = lines, cols = non-head buses
  Eigen::MatrixXd c_inv;  // inverse of c
  Eigen::MatrixXd d_r;    // 3N x 3N block diagonal
  Eigen::MatrixXd d_x;

  int size() const { return static_cast<int>(c.rows() / 3); }
};

/// Phase-coupled resistance and reactance of a line segment.
struct CoupledImpedance {
  Mat3 r_bar;
  Mat3 x_bar;
};

/// r_bar = Re(W)∘r + Im(W)∘x, x_bar = Re(W)∘x − Im(W)∘r, with W the
/// phase coupling matrix built from ω = exp(j2π/3).
CoupledImpedance phase_coupled_impedance(const Mat3& r_matrix, const Mat3& x_matrix);

/// Builds incidence blocks (c_inv by walking the tree) and the block-diagonal
/// impedance matrices. Throws InternalError if c·c_inv deviates from I.
NetworkMatrices build_matrices(const Network& network);

/// v_{1:N} = 1⊗v0 + 2·c_inv·(d_r·P + d_x·Q). Throws ShapeError.
Eigen::VectorXd lindistflow_voltages(const NetworkMatrices& m, const Vec3& v0,
                                     const Eigen::VectorXd& p_flows,
                                     const Eigen::VectorXd& q_flows);

struct HeadInjection {
  Vec3 p0;
  Vec3 q0;
};

/// p0 = c0ᵀP, q0 = c0ᵀQ. Throws ShapeError.
HeadInjection head_injection(const NetworkMatrices& m, const Eigen::VectorXd& p_flows,
                             const Eigen::VectorXd& q_flows);

/// Line flows from bus injections by accumulating each subtree (no matrix
/// inverse involved). Injections are stacked over buses 1..N.
Eigen::VectorXd accumulate_flows(const Network& network, const Eigen::VectorXd& injections);

// Feeder documents (`gridclear-feeder/1`).

inline constexpr std::string_view kFeederSchema = "gridclear-feeder/1";

/// Parses a feeder document and converts it to per unit.
/// Throws SchemaError, TopologyError.
Network parse_network(std::string_view document);

/// Reads and parses a feeder document. Throws IoError plus parse errors.
Network load_network(const std::filesystem::path& path);

/// Total fixed consumption of the feeder in physical units (kW, kVAr);
/// positive for net load.
std::pair<double, double> total_fixed_load(const Network& network);

}  // namespace gridclear
