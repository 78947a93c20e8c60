#include "gridclear/network.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <queue>

#include "gridclear/errors.hpp"

namespace gridclear {

namespace {

bool absent_entries_zero(const Mat3& m, PhaseSet phases) {
  for (Phase row : kAllPhases) {
    for (Phase col : kAllPhases) {
      if (phases.contains(row) && phases.contains(col)) continue;
      if (m(slot(row), slot(col)) != 0.0) return false;
    }
  }
  return true;
}

std::string bus_name(const Bus& bus) {
  return bus.label.empty() ? std::to_string(bus.index) : bus.label;
}

}  // namespace

Network::Network(FeederLimits limits, std::vector<Bus> buses, std::vector<Line> lines)
    : limits_(std::move(limits)), buses_(std::move(buses)) {
  if (!(limits_.s_base_kva > 0.0) || !(limits_.v_base_kv > 0.0))
    throw SchemaError("s_base and v_base must be positive");
  for (int k = 0; k < 3; ++k) {
    if (!(limits_.v_min[k] < limits_.v0[k] && limits_.v0[k] < limits_.v_max[k]))
      throw SchemaError("voltage limits must satisfy v_min < v0 < v_max on every phase");
    if (limits_.s0_max[k] < 0.0) throw SchemaError("negative substation limit");
  }

  std::sort(buses_.begin(), buses_.end(),
            [](const Bus& a, const Bus& b) { return a.index < b.index; });
  const int bus_count = static_cast<int>(buses_.size());
  if (bus_count == 0 || !buses_.front().is_head || buses_.front().index != 0)
    throw SchemaError("missing head bus with index 0");
  for (int i = 0; i < bus_count; ++i) {
    const Bus& bus = buses_[static_cast<std::size_t>(i)];
    if (bus.index != i) throw SchemaError("bus indices must be contiguous from 0");
    if (i > 0 && bus.is_head) throw SchemaError("more than one head bus");
    if (bus.phases.empty()) throw SchemaError("bus " + bus_name(bus) + " has no phases");
    const Vec3 absent = Vec3::Ones() - bus.phases.mask();
    if (absent.cwiseProduct(bus.fixed_injection_p).cwiseAbs().maxCoeff() > 0.0 ||
        absent.cwiseProduct(bus.fixed_injection_q).cwiseAbs().maxCoeff() > 0.0)
      throw SchemaError("bus " + bus_name(bus) + " has fixed injection on an absent phase");
  }
  if (buses_.front().fixed_injection_p.cwiseAbs().maxCoeff() > 0.0 ||
      buses_.front().fixed_injection_q.cwiseAbs().maxCoeff() > 0.0)
    throw SchemaError("head bus cannot carry fixed injections");

  const int n = bus_count - 1;
  if (static_cast<int>(lines.size()) != n)
    throw TopologyError("a radial feeder with " + std::to_string(n) +
                        " non-head buses needs exactly that many lines, got " +
                        std::to_string(lines.size()));

  std::vector<std::vector<int>> incident(static_cast<std::size_t>(bus_count));
  for (int l = 0; l < n; ++l) {
    const Line& line = lines[static_cast<std::size_t>(l)];
    if (line.from_bus < 0 || line.from_bus >= bus_count || line.to_bus < 0 ||
        line.to_bus >= bus_count)
      throw SchemaError("line " + std::to_string(l) + " references an unknown bus");
    if (line.from_bus == line.to_bus) throw TopologyError("self-loop on bus " + std::to_string(line.from_bus));
    if ((line.s_max.array() < 0.0).any()) throw SchemaError("negative s_max on line " + std::to_string(l));
    incident[static_cast<std::size_t>(line.from_bus)].push_back(l);
    incident[static_cast<std::size_t>(line.to_bus)].push_back(l);
  }

  // Breadth-first walk from the head; reaching a bus twice means a cycle.
  parent_.assign(static_cast<std::size_t>(bus_count), -1);
  children_.assign(static_cast<std::size_t>(bus_count), {});
  std::vector<bool> seen(static_cast<std::size_t>(bus_count), false);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  lines_.assign(static_cast<std::size_t>(n), Line{});
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = true;
  order_.clear();
  while (!frontier.empty()) {
    const int bus = frontier.front();
    frontier.pop();
    order_.push_back(bus);
    for (int l : incident[static_cast<std::size_t>(bus)]) {
      if (used[static_cast<std::size_t>(l)]) continue;
      used[static_cast<std::size_t>(l)] = true;
      Line line = lines[static_cast<std::size_t>(l)];
      if (line.to_bus == bus) std::swap(line.from_bus, line.to_bus);
      const int child = line.to_bus;
      if (seen[static_cast<std::size_t>(child)])
        throw TopologyError("line set contains a cycle through bus " + std::to_string(child));
      seen[static_cast<std::size_t>(child)] = true;
      parent_[static_cast<std::size_t>(child)] = bus;
      children_[static_cast<std::size_t>(bus)].push_back(child);
      lines_[static_cast<std::size_t>(child - 1)] = line;
      frontier.push(child);
    }
  }
  if (static_cast<int>(order_.size()) != bus_count)
    throw TopologyError("feeder is not connected to the head bus");

  for (int l = 0; l < n; ++l) {
    const Line& line = lines_[static_cast<std::size_t>(l)];
    const Bus& child = buses_[static_cast<std::size_t>(line.to_bus)];
    const Bus& upstream = buses_[static_cast<std::size_t>(line.from_bus)];
    const std::string where = bus_name(upstream) + "-" + bus_name(child);
    if (!line.phases.subset_of(upstream.phases))
      throw SchemaError("line " + where + " has phases missing at its upstream bus");
    if (!child.phases.subset_of(line.phases))
      throw SchemaError("bus " + bus_name(child) + " has phases its feeding line lacks");
    if (!absent_entries_zero(line.r_matrix, line.phases) ||
        !absent_entries_zero(line.x_matrix, line.phases))
      throw SchemaError("line " + where + " has impedance on an absent phase");
    for (Phase p : kAllPhases) {
      const double s = line.s_max[slot(p)];
      if (line.phases.contains(p) && !(s > 0.0))
        throw SchemaError("line " + where + " needs a positive s_max on phase " + to_char(p));
      if (!line.phases.contains(p) && s != 0.0)
        throw SchemaError("line " + where + " has s_max on absent phase " + to_char(p));
    }
  }
}

Eigen::VectorXd Network::fixed_p() const {
  Eigen::VectorXd out(3 * size());
  for (int i = 1; i <= size(); ++i) out.segment<3>(3 * (i - 1)) = buses_[static_cast<std::size_t>(i)].fixed_injection_p;
  return out;
}

Eigen::VectorXd Network::fixed_q() const {
  Eigen::VectorXd out(3 * size());
  for (int i = 1; i <= size(); ++i) out.segment<3>(3 * (i - 1)) = buses_[static_cast<std::size_t>(i)].fixed_injection_q;
  return out;
}

Eigen::VectorXd Network::s_max() const {
  Eigen::VectorXd out(3 * size());
  for (int l = 0; l < size(); ++l) out.segment<3>(3 * l) = lines_[static_cast<std::size_t>(l)].s_max;
  return out;
}

std::optional<int> Network::find_label(std::string_view label) const {
  for (const Bus& bus : buses_)
    if (bus.label == label) return bus.index;
  return std::nullopt;
}

CoupledImpedance phase_coupled_impedance(const Mat3& r_matrix, const Mat3& x_matrix) {
  // W(i, j) = ω^((j - i) mod 3); only the real and imaginary parts are needed.
  const double re = std::cos(2.0 * std::numbers::pi / 3.0);
  const double im = std::sin(2.0 * std::numbers::pi / 3.0);
  Mat3 w_re;
  Mat3 w_im;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      switch ((j - i + 3) % 3) {
        case 0: w_re(i, j) = 1.0; w_im(i, j) = 0.0; break;
        case 1: w_re(i, j) = re;  w_im(i, j) = im;  break;
        default: w_re(i, j) = re; w_im(i, j) = -im; break;
      }
    }
  }
  CoupledImpedance out;
  out.r_bar = w_re.cwiseProduct(r_matrix) + w_im.cwiseProduct(x_matrix);
  out.x_bar = w_re.cwiseProduct(x_matrix) - w_im.cwiseProduct(r_matrix);
  return out;
}

NetworkMatrices build_matrices(const Network& network) {
  const int n = network.size();
  const Eigen::Index dim = 3 * n;
  NetworkMatrices m;
  m.c0 = Eigen::MatrixXd::Zero(dim, 3);
  m.c = Eigen::MatrixXd::Zero(dim, dim);
  m.c_inv = Eigen::MatrixXd::Zero(dim, dim);
  m.d_r = Eigen::MatrixXd::Zero(dim, dim);
  m.d_x = Eigen::MatrixXd::Zero(dim, dim);

  const Mat3 eye = Mat3::Identity();
  for (int l = 0; l < n; ++l) {
    const Line& line = network.lines()[static_cast<std::size_t>(l)];
    // +I where the line originates, -I where it feeds.
    if (line.from_bus == 0)
      m.c0.block<3, 3>(3 * l, 0) = eye;
    else
      m.c.block<3, 3>(3 * l, 3 * (line.from_bus - 1)) = eye;
    m.c.block<3, 3>(3 * l, 3 * (line.to_bus - 1)) = -eye;

    const CoupledImpedance z = phase_coupled_impedance(line.r_matrix, line.x_matrix);
    m.d_r.block<3, 3>(3 * l, 3 * l) = z.r_bar;
    m.d_x.block<3, 3>(3 * l, 3 * l) = z.x_bar;
  }

  // c_inv(bus j, line k) = -I when line k lies on the path from the head to j.
  for (int bus = 1; bus <= n; ++bus) {
    for (int up = bus; up != 0; up = network.parent(up))
      m.c_inv.block<3, 3>(3 * (bus - 1), 3 * network.line_into(up)) = -eye;
  }

  const double residual =
      (m.c * m.c_inv - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff();
  if (n > 0 && !(residual <= 1e-10))
    throw InternalError("incidence inverse residual " + std::to_string(residual));
  return m;
}

Eigen::VectorXd lindistflow_voltages(const NetworkMatrices& m, const Vec3& v0,
                                     const Eigen::VectorXd& p_flows,
                                     const Eigen::VectorXd& q_flows) {
  const Eigen::Index dim = m.c.rows();
  if (p_flows.size() != dim || q_flows.size() != dim)
    throw ShapeError("flow vectors must have " + std::to_string(dim) + " entries");
  Eigen::VectorXd v = v0.replicate(dim / 3, 1);
  if (dim == 0) return v;
  v.noalias() += 2.0 * (m.c_inv * (m.d_r * p_flows + m.d_x * q_flows));
  return v;
}

HeadInjection head_injection(const NetworkMatrices& m, const Eigen::VectorXd& p_flows,
                             const Eigen::VectorXd& q_flows) {
  const Eigen::Index dim = m.c0.rows();
  if (p_flows.size() != dim || q_flows.size() != dim)
    throw ShapeError("flow vectors must have " + std::to_string(dim) + " entries");
  return {m.c0.transpose() * p_flows, m.c0.transpose() * q_flows};
}

Eigen::VectorXd accumulate_flows(const Network& network, const Eigen::VectorXd& injections) {
  const int n = network.size();
  if (injections.size() != 3 * n) throw ShapeError("injection vector must have 3N entries");
  // Flow into bus i equals minus the total injection of its subtree.
  Eigen::VectorXd flows = -injections;
  const auto& order = network.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int bus = *it;
    if (bus == 0) continue;
    const int up = network.parent(bus);
    if (up != 0) flows.segment<3>(3 * (up - 1)) += flows.segment<3>(3 * (bus - 1));
  }
  return flows;  // bus i's block is the flow on line i - 1
}

std::pair<double, double> total_fixed_load(const Network& network) {
  const double s = network.s_base_kva();
  return {-network.fixed_p().sum() * s, -network.fixed_q().sum() * s};
}

}  // namespace gridclear
