#include "gridclear/tdopf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "gridclear/errors.hpp"

namespace gridclear {

PolygonApprox polygon_coefficients(int edge_count) {
  if (edge_count < 3) throw DomainError("a polygon needs at least 3 edges");
  PolygonApprox out;
  const double offset = -std::cos(std::numbers::pi / edge_count);
  for (int e = 1; e <= edge_count; ++e) {
    const double angle = 2.0 * std::numbers::pi * e / edge_count;
    out.edges.push_back({std::cos(angle), std::sin(angle), offset});
  }
  return out;
}

FeederModel FeederModel::build(Network network) {
  FeederModel model;
  auto shared = std::make_shared<const Network>(std::move(network));
  model.matrices = std::make_shared<const NetworkMatrices>(build_matrices(*shared));
  model.network = std::move(shared);
  return model;
}

std::string to_string(RowFamily family) {
  switch (family) {
    case RowFamily::Voltage: return "voltage";
    case RowFamily::LinePolygon: return "line_polygon";
    case RowFamily::SubstationPolygon: return "substation_polygon";
    case RowFamily::ZeroNet: return "zero_net";
  }
  return "unknown";
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
  }
  return "unknown";
}

namespace {

// Flow, voltage and head sensitivities to the accepted fractions, plus the
// fixed-load operating point they perturb.
struct Sensitivity {
  Eigen::MatrixXd p_flow, q_flow, voltage, p_head, q_head;
  Eigen::VectorXd p_flow0, q_flow0, voltage0;
  Vec3 p_head0, q_head0;
};

Sensitivity sensitivities(const Network& net, const NetworkMatrices& m, const Eigen::MatrixXd& inj_p,
                          const Eigen::MatrixXd& inj_q) {
  Sensitivity s;
  // Cᵀ P = p  =>  P = c_invᵀ p.
  const Eigen::MatrixXd to_flow = m.c_inv.transpose();
  s.p_flow = to_flow * inj_p;
  s.q_flow = to_flow * inj_q;
  s.voltage = 2.0 * m.c_inv * (m.d_r * s.p_flow + m.d_x * s.q_flow);
  s.p_head = m.c0.transpose() * s.p_flow;
  s.q_head = m.c0.transpose() * s.q_flow;
  s.p_flow0 = to_flow * net.fixed_p();
  s.q_flow0 = to_flow * net.fixed_q();
  s.voltage0 = lindistflow_voltages(m, net.v0(), s.p_flow0, s.q_flow0);
  s.p_head0 = m.c0.transpose() * s.p_flow0;
  s.q_head0 = m.c0.transpose() * s.q_flow0;
  return s;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TdopfProblem TdopfProblem::assemble(const FeederModel& feeder, std::shared_ptr<const DerPopulation> population,
                                    const MarketParams& params, const PolygonApprox& polygon, SolveSetup setup) {
  if (!feeder.network || !feeder.matrices || !population) throw SchemaError("assemble needs a feeder and a population");
  if (!(params.period_hours > 0.0)) throw DomainError("period must be positive");
  if (!(params.network_cost >= 0.0)) throw DomainError("network cost must be non-negative");
  if (!(params.big_m > 0.0)) throw DomainError("big M must be positive");
  if (polygon.edges.size() < 3) throw DomainError("polygon needs at least 3 edges");

  const Network& net = *feeder.network;
  const NetworkMatrices& m = *feeder.matrices;
  const DerPopulation& pop = *population;
  const int dim = 3 * net.size();
  const auto n = static_cast<Eigen::Index>(pop.size());
  if (m.size() != net.size()) throw SchemaError("network matrices do not match the network");
  if (!setup.clamps.empty() && setup.clamps.size() != pop.size())
    throw SchemaError("clamp list must cover every DER");
  for (const auto& c : setup.clamps)
    if (c && !(*c >= 0.0 && *c <= 1.0)) throw DomainError("clamp values must lie in [0, 1]");
  std::set<std::size_t> group(setup.zero_net_group.begin(), setup.zero_net_group.end());
  if (group.size() != setup.zero_net_group.size()) throw SchemaError("zero-net group has duplicates");
  for (std::size_t i : group)
    if (i >= pop.size()) throw SchemaError("zero-net group references an unknown DER");
  for (const Der& der : pop.ders())
    if (der.bus < 1 || der.bus > net.size()) throw SchemaError("DER " + der.id + " is not on this feeder");

  TdopfProblem prob;
  prob.feeder_ = feeder;
  prob.population_ = std::move(population);
  prob.params_ = params;
  prob.polygon_ = polygon;
  prob.setup_ = std::move(setup);

  prob.inj_p_ = Eigen::MatrixXd::Zero(dim, n);
  prob.inj_q_ = Eigen::MatrixXd::Zero(dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const int row = 3 * (pop[k].bus - 1);
    prob.inj_p_.block<3, 1>(row, i) = pop.injection(k);
    prob.inj_q_.block<3, 1>(row, i) = pop.eta(k) * pop.injection(k);
  }
  const Sensitivity s = sensitivities(net, m, prob.inj_p_, prob.inj_q_);

  const double s_base = net.s_base_kva();
  const double dt = params.period_hours;
  const double head_cost = params.network_cost * s_base * dt;  // ¢ per p.u. of head import

  lp::Problem& lp = prob.lp_;
  lp.cost.resize(n);
  lp.lower = Eigen::VectorXd::Zero(n);
  lp.upper = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    lp.cost[i] = gamma_price(pop[k], params.big_m) * pop[k].volume * dt + head_cost * s.p_head.col(i).sum();
    if (!prob.setup_.clamps.empty() && prob.setup_.clamps[k]) lp.lower[i] = lp.upper[i] = *prob.setup_.clamps[k];
  }
  prob.offset_ = head_cost * s.p_head0.sum();

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> lo, hi;
  auto add = [&](Eigen::VectorXd row, double l, double u, RowTag tag) {
    rows.push_back(std::move(row));
    lo.push_back(l);
    hi.push_back(u);
    prob.tags_.push_back(tag);
  };

  // Voltage limits on the phases present at each bus.
  for (int bus = 1; bus <= net.size(); ++bus) {
    const Bus& b = net.buses()[static_cast<std::size_t>(bus)];
    for (Phase ph : kAllPhases) {
      if (!b.phases.contains(ph)) continue;
      const int slot_index = 3 * (bus - 1) + slot(ph);
      prob.voltage_slots_.push_back(slot_index);
      add(s.voltage.row(slot_index).transpose(), net.v_min()[slot(ph)] - s.voltage0[slot_index],
          net.v_max()[slot(ph)] - s.voltage0[slot_index], {RowFamily::Voltage, slot_index, 0});
    }
  }
  // Polygon limits on every present line phase.
  const Eigen::VectorXd s_max = net.s_max();
  for (int k = 0; k < dim; ++k) {
    if (!(s_max[k] > 0.0)) continue;
    for (std::size_t e = 0; e < polygon.edges.size(); ++e) {
      const PolygonEdge& edge = polygon.edges[e];
      add(edge.beta * s.p_flow.row(k).transpose() + edge.delta * s.q_flow.row(k).transpose(), -kInf,
          -edge.gamma * s_max[k] - edge.beta * s.p_flow0[k] - edge.delta * s.q_flow0[k],
          {RowFamily::LinePolygon, k, static_cast<int>(e)});
    }
  }
  for (int ph = 0; ph < 3; ++ph) {
    for (std::size_t e = 0; e < polygon.edges.size(); ++e) {
      const PolygonEdge& edge = polygon.edges[e];
      add(edge.beta * s.p_head.row(ph).transpose() + edge.delta * s.q_head.row(ph).transpose(), -kInf,
          -edge.gamma * net.s0_max()[ph] - edge.beta * s.p_head0[ph] - edge.delta * s.q_head0[ph],
          {RowFamily::SubstationPolygon, ph, static_cast<int>(e)});
    }
  }
  if (!group.empty()) {
    // Signed accepted volume of the group, in p.u.
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    for (std::size_t i : group) row[static_cast<Eigen::Index>(i)] = pop[i].volume / s_base;
    add(std::move(row), 0.0, 0.0, {RowFamily::ZeroNet, 0, 0});
  }

  const auto m_rows = static_cast<Eigen::Index>(rows.size());
  lp.rows.resize(m_rows, n);
  lp.row_lower.resize(m_rows);
  lp.row_upper.resize(m_rows);
  for (Eigen::Index r = 0; r < m_rows; ++r) {
    const auto k = static_cast<std::size_t>(r);
    if (n > 0) lp.rows.row(r) = rows[k].transpose();
    lp.row_lower[r] = lo[k];
    lp.row_upper[r] = hi[k];
  }
  return prob;
}

Eigen::VectorXd TdopfProblem::injections_p(const Eigen::VectorXd& alpha) const {
  if (alpha.size() != inj_p_.cols()) throw ShapeError("alpha must have one entry per DER");
  return network().fixed_p() + inj_p_ * alpha;
}

Eigen::VectorXd TdopfProblem::injections_q(const Eigen::VectorXd& alpha) const {
  if (alpha.size() != inj_q_.cols()) throw ShapeError("alpha must have one entry per DER");
  return network().fixed_q() + inj_q_ * alpha;
}

namespace {

// Right-hand sides of the flow stationarity identities C·λᵀ = rhs.
std::pair<Eigen::VectorXd, Eigen::VectorXd> flow_gradients(const TdopfProblem& prob, const TdopfSolution& sol) {
  const NetworkMatrices& m = prob.matrices();
  const double head_cost = prob.params().network_cost * prob.network().s_base_kva() * prob.params().period_hours;
  const Eigen::VectorXd dv = m.c_inv.transpose() * (sol.mu_v_upper - sol.mu_v_lower);
  Eigen::VectorXd rp = head_cost * m.c0 * Vec3::Ones() + 2.0 * m.d_r.transpose() * dv;
  Eigen::VectorXd rq = 2.0 * m.d_x.transpose() * dv;
  const auto& edges = prob.polygon().edges;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    rp += edges[e].beta * (sol.mu_line[e] + m.c0 * sol.mu_sub[e]);
    rq += edges[e].delta * (sol.mu_line[e] + m.c0 * sol.mu_sub[e]);
  }
  return {rp, rq};
}

}  // namespace

TdopfSolution solve(const TdopfProblem& problem) {
  const lp::Result r = lp::solve(problem.lp());
  const int dim = 3 * problem.network().size();
  const std::size_t edge_count = problem.polygon().edges.size();

  TdopfSolution sol;
  sol.iterations = r.iterations;
  if (r.status == lp::Status::IterationLimit) throw InternalError("LP iteration limit reached");
  if (r.status == lp::Status::Infeasible) {
    sol.status = SolveStatus::Infeasible;
    std::set<std::string> families;
    for (int row : r.infeasible_rows) families.insert(to_string(problem.row_tags()[static_cast<std::size_t>(row)].family));
    if (r.bounds_in_certificate) families.insert("dispatch_bounds");
    sol.infeasibility_hint.assign(families.begin(), families.end());
    return sol;
  }

  sol.status = SolveStatus::Optimal;
  sol.alpha = r.x.cwiseMax(problem.lp().lower).cwiseMin(problem.lp().upper);
  const NetworkMatrices& m = problem.matrices();
  const Eigen::VectorXd to_flow_p = problem.injections_p(sol.alpha);
  const Eigen::VectorXd to_flow_q = problem.injections_q(sol.alpha);
  sol.p_flows = m.c_inv.transpose() * to_flow_p;
  sol.q_flows = m.c_inv.transpose() * to_flow_q;
  sol.voltages = lindistflow_voltages(m, problem.network().v0(), sol.p_flows, sol.q_flows);
  const HeadInjection head = head_injection(m, sol.p_flows, sol.q_flows);
  sol.p0 = head.p0;
  sol.q0 = head.q0;
  sol.objective = problem.lp().cost.dot(sol.alpha) + problem.objective_offset();

  sol.mu_v_upper = Eigen::VectorXd::Zero(dim);
  sol.mu_v_lower = Eigen::VectorXd::Zero(dim);
  sol.mu_line.assign(edge_count, Eigen::VectorXd::Zero(dim));
  sol.mu_sub.assign(edge_count, Vec3::Zero());
  const auto& tags = problem.row_tags();
  for (std::size_t k = 0; k < tags.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const RowTag& tag = tags[k];
    switch (tag.family) {
      case RowFamily::Voltage:
        sol.mu_v_upper[tag.slot] = r.row_dual_upper[row];
        sol.mu_v_lower[tag.slot] = r.row_dual_lower[row];
        break;
      case RowFamily::LinePolygon:
        sol.mu_line[static_cast<std::size_t>(tag.edge)][tag.slot] = r.row_dual_upper[row];
        break;
      case RowFamily::SubstationPolygon:
        sol.mu_sub[static_cast<std::size_t>(tag.edge)][tag.slot] = r.row_dual_upper[row];
        break;
      case RowFamily::ZeroNet:
        sol.mu_zero_net = r.row_dual_upper[row] - r.row_dual_lower[row];
        break;
    }
  }
  sol.nu_upper = r.bound_dual_upper;
  sol.nu_lower = r.bound_dual_lower;

  const auto [rp, rq] = flow_gradients(problem, sol);
  sol.lambda_p = m.c_inv * rp;
  sol.lambda_q = m.c_inv * rq;
  return sol;
}

double KktResiduals::scaled_max() const {
  return std::max({stationarity_p, stationarity_q, stationarity_alpha, complementarity, dual_infeasibility}) /
         std::max(scale, 1.0);
}

KktResiduals kkt_residuals(const TdopfSolution& sol, const TdopfProblem& prob) {
  if (!sol.optimal()) throw StateError("KKT residuals need an optimal solution");
  const NetworkMatrices& m = prob.matrices();
  const DerPopulation& pop = prob.population();
  const double s_base = prob.network().s_base_kva();
  const double dt = prob.params().period_hours;
  KktResiduals out;

  const auto [rp, rq] = flow_gradients(prob, sol);
  out.stationarity_p = (m.c * sol.lambda_p - rp).cwiseAbs().maxCoeff();
  out.stationarity_q = (m.c * sol.lambda_q - rq).cwiseAbs().maxCoeff();
  out.scale = std::max({1.0, rp.cwiseAbs().maxCoeff(), rq.cwiseAbs().maxCoeff()});
  if (m.c.size() == 0) out.stationarity_p = out.stationarity_q = 0.0;

  std::vector<bool> grouped(pop.size(), false);
  for (std::size_t i : prob.setup().zero_net_group) grouped[i] = true;
  for (std::size_t k = 0; k < pop.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double direct = gamma_price(pop[k], prob.params().big_m) * pop[k].volume * dt;
    const double balance = sol.lambda_p.dot(prob.injection_p().col(i)) + sol.lambda_q.dot(prob.injection_q().col(i));
    const double group = grouped[k] ? sol.mu_zero_net * pop[k].volume / s_base : 0.0;
    const double residual = direct + balance + sol.nu_upper[i] - sol.nu_lower[i] + group;
    out.stationarity_alpha = std::max(out.stationarity_alpha, std::abs(residual));
    out.scale = std::max({out.scale, std::abs(direct), std::abs(balance)});
  }

  // Complementary slackness and sign checks on every LP row and bound.
  const lp::Problem& lp = prob.lp();
  const Eigen::VectorXd activity = lp.rows.rows() > 0 && lp.rows.cols() > 0
                                       ? Eigen::VectorXd(lp.rows * sol.alpha)
                                       : Eigen::VectorXd::Zero(lp.rows.rows());
  double min_multiplier = 0.0;
  const auto& tags = prob.row_tags();
  for (std::size_t k = 0; k < tags.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const RowTag& tag = tags[k];
    double upper_mult = 0.0;
    double lower_mult = 0.0;
    switch (tag.family) {
      case RowFamily::Voltage:
        upper_mult = sol.mu_v_upper[tag.slot];
        lower_mult = sol.mu_v_lower[tag.slot];
        break;
      case RowFamily::LinePolygon: upper_mult = sol.mu_line[static_cast<std::size_t>(tag.edge)][tag.slot]; break;
      case RowFamily::SubstationPolygon: upper_mult = sol.mu_sub[static_cast<std::size_t>(tag.edge)][tag.slot]; break;
      case RowFamily::ZeroNet: continue;  // equality: free multiplier, no slack
    }
    min_multiplier = std::min({min_multiplier, upper_mult, lower_mult});
    if (std::isfinite(lp.row_upper[row]))
      out.complementarity = std::max(out.complementarity, upper_mult * std::abs(lp.row_upper[row] - activity[row]));
    if (std::isfinite(lp.row_lower[row]))
      out.complementarity = std::max(out.complementarity, lower_mult * std::abs(activity[row] - lp.row_lower[row]));
  }
  for (Eigen::Index i = 0; i < sol.alpha.size(); ++i) {
    min_multiplier = std::min({min_multiplier, sol.nu_upper[i], sol.nu_lower[i]});
    out.complementarity = std::max(out.complementarity, sol.nu_upper[i] * std::abs(lp.upper[i] - sol.alpha[i]));
    out.complementarity = std::max(out.complementarity, sol.nu_lower[i] * std::abs(sol.alpha[i] - lp.lower[i]));
  }
  out.dual_infeasibility = std::max(0.0, -min_multiplier);
  return out;
}

double qualification_price(const Der& der, const Vec3& lambda_p_bus, const Vec3& lambda_q_bus, double big_m,
                           double s_base_kva, double period_hours) {
  const double eta = reactive_ratio(der.power_factor);
  double sum = 0.0;
  for (Phase ph : kAllPhases)
    if (der.phases.contains(ph)) sum += -lambda_p_bus[slot(ph)] - eta * lambda_q_bus[slot(ph)];
  double price = sum / (der.phases.size() * s_base_kva * period_hours);
  if (der.side() == Side::Offer) price += big_m / der.volume;
  return price;
}

double qualification_price(const Der& der, const Eigen::VectorXd& lambda_p, const Eigen::VectorXd& lambda_q,
                           double big_m, double s_base_kva, double period_hours) {
  const Eigen::Index row = 3 * (der.bus - 1);
  if (der.bus < 1 || row + 3 > lambda_p.size() || lambda_p.size() != lambda_q.size())
    throw ShapeError("multiplier vectors do not cover the DER's bus");
  return qualification_price(der, Vec3(lambda_p.segment<3>(row)), Vec3(lambda_q.segment<3>(row)), big_m, s_base_kva,
                             period_hours);
}

}  // namespace gridclear
