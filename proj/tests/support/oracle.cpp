#include "oracle.hpp"

#include <cmath>
#include <complex>
#include <limits>

namespace gridclear::testing {

namespace {

using cd = std::complex<double>;

struct Coupled {
  Mat3 r;
  Mat3 x;
};

Coupled couple(const Mat3& r, const Mat3& x) {
  const cd w = std::polar(1.0, 2.0 * M_PI / 3.0);
  const cd W[3][3] = {{1.0, w, w * w}, {w * w, 1.0, w}, {w, w * w, 1.0}};
  Coupled out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      // Re(W)∘r + Im(W)∘x and Re(W)∘x − Im(W)∘r, i.e. the real and
      // imaginary parts of conj(W)∘(r + jx).
      const cd z = std::conj(W[i][j]) * cd(r(i, j), x(i, j));
      out.r(i, j) = z.real();
      out.x(i, j) = z.imag();
    }
  return out;
}

// Line flows (per line, 3 phases each) caused by bus injections: each line
// carries minus the total injection of the subtree below it.
void eliminate(const Network& net, const Eigen::VectorXd& inj, Eigen::VectorXd& flow) {
  flow = Eigen::VectorXd::Zero(3 * net.size());
  for (int bus = 1; bus <= net.size(); ++bus)
    for (int b = bus; b != 0; b = net.parent(b)) flow.segment<3>(3 * (b - 1)) -= inj.segment<3>(3 * (bus - 1));
}

// Constraint values (all of the form value <= 0) for given bus injections.
Eigen::VectorXd constraint_values(const MarketContext& ctx, const std::vector<Coupled>& z, const Eigen::VectorXd& p,
                                  const Eigen::VectorXd& q, bool with_constants, double& p0_total) {
  const Network& net = *ctx.feeder.network;
  Eigen::VectorXd pf, qf;
  eliminate(net, p, pf);
  eliminate(net, q, qf);
  const double c = with_constants ? 1.0 : 0.0;

  std::vector<double> out;
  for (int bus = 1; bus <= net.size(); ++bus) {
    Vec3 v = c * net.v0();
    for (int b = bus; b != 0; b = net.parent(b)) {
      const Coupled& zl = z[static_cast<std::size_t>(b - 1)];
      v -= 2.0 * (zl.r * pf.segment<3>(3 * (b - 1)) + zl.x * qf.segment<3>(3 * (b - 1)));
    }
    for (Phase ph : kAllPhases) {
      if (!net.buses()[static_cast<std::size_t>(bus)].phases.contains(ph)) continue;
      out.push_back(v[slot(ph)] - c * net.v_max()[slot(ph)]);
      out.push_back(c * net.v_min()[slot(ph)] - v[slot(ph)]);
    }
  }
  const int edges = static_cast<int>(ctx.polygon.edges.size());
  auto polygon = [&](double pp, double qq, double s) {
    for (int e = 1; e <= edges; ++e)
      out.push_back(std::cos(2 * M_PI * e / edges) * pp + std::sin(2 * M_PI * e / edges) * qq -
                    c * std::cos(M_PI / edges) * s);
  };
  for (int bus = 1; bus <= net.size(); ++bus) {
    const Line& line = net.lines()[static_cast<std::size_t>(bus - 1)];
    for (Phase ph : kAllPhases)
      if (line.s_max[slot(ph)] > 0.0)
        polygon(pf[3 * (bus - 1) + slot(ph)], qf[3 * (bus - 1) + slot(ph)], line.s_max[slot(ph)]);
  }
  Vec3 p0 = Vec3::Zero(), q0 = Vec3::Zero();
  for (int bus = 1; bus <= net.size(); ++bus)
    if (net.parent(bus) == 0) {
      p0 += pf.segment<3>(3 * (bus - 1));
      q0 += qf.segment<3>(3 * (bus - 1));
    }
  for (int ph = 0; ph < 3; ++ph) polygon(p0[ph], q0[ph], net.s0_max()[ph]);
  p0_total = p0.sum();
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

}  // namespace

AffineModel affine_model(const MarketContext& ctx) {
  const Network& net = *ctx.feeder.network;
  const DerPopulation& pop = *ctx.population;
  const double s = net.s_base_kva();
  const double dt = ctx.params.period_hours;
  std::vector<Coupled> z;
  for (const Line& line : net.lines()) z.push_back(couple(line.r_matrix, line.x_matrix));

  AffineModel model;
  double p0 = 0.0;
  model.g0 = constraint_values(ctx, z, net.fixed_p(), net.fixed_q(), true, p0);
  model.cost0 = ctx.params.network_cost * s * dt * p0;
  model.g.resize(model.g0.size(), static_cast<Eigen::Index>(pop.size()));
  model.cost.resize(static_cast<Eigen::Index>(pop.size()));
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const Der& der = pop[i];
    const double eta = std::sqrt(1.0 / (der.power_factor * der.power_factor) - 1.0);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(3 * net.size());
    for (Phase ph : kAllPhases)
      if (der.phases.contains(ph)) p[3 * (der.bus - 1) + slot(ph)] = der.volume / (s * der.phases.size());
    const Eigen::VectorXd q = eta * p;
    double dp0 = 0.0;
    model.g.col(static_cast<Eigen::Index>(i)) = constraint_values(ctx, z, p, q, false, dp0);
    const double gamma = der.volume < 0 ? der.price : der.price - ctx.params.big_m / der.volume;
    model.cost[static_cast<Eigen::Index>(i)] = gamma * der.volume * dt + ctx.params.network_cost * s * dt * dp0;
  }
  return model;
}

double oracle_objective(const AffineModel& model, const Eigen::VectorXd& alpha) {
  return model.cost0 + model.cost.dot(alpha);
}

double oracle_max_violation(const AffineModel& model, const Eigen::VectorXd& alpha) {
  if (model.g0.size() == 0) return -std::numeric_limits<double>::infinity();
  return (model.g0 + model.g * alpha).maxCoeff();
}

GridOptimum grid_optimum(const MarketContext& ctx, double step, double tol) {
  const AffineModel model = affine_model(ctx);
  const int n = static_cast<int>(model.cost.size());
  const int levels = static_cast<int>(std::lround(1.0 / step));
  GridOptimum best;
  best.objective = std::numeric_limits<double>::infinity();

  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  // Partial constraint sums per depth avoid re-summing every column.
  std::vector<Eigen::VectorXd> partial(static_cast<std::size_t>(n + 1), model.g0);
  std::vector<double> cost(static_cast<std::size_t>(n + 1), model.cost0);

  auto leaf = [&] {
    ++best.points;
    const Eigen::VectorXd& g = partial[static_cast<std::size_t>(n)];
    if (g.size() > 0 && g.maxCoeff() > tol) return;
    const double obj = cost[static_cast<std::size_t>(n)];
    if (obj < best.objective) {
      best.objective = obj;
      best.feasible = true;
      best.alpha.assign(static_cast<std::size_t>(n), 0.0);
      for (int i = 0; i < n; ++i) best.alpha[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i)] * step;
    }
  };
  // Iterative odometer over the grid.
  if (n == 0) {
    leaf();
    return best;
  }
  int depth = 0;
  idx[0] = -1;
  while (depth >= 0) {
    auto d = static_cast<std::size_t>(depth);
    if (++idx[d] > levels) {
      --depth;
      continue;
    }
    const double a = idx[d] * step;
    partial[d + 1] = partial[d] + a * model.g.col(depth);
    cost[d + 1] = cost[d] + a * model.cost[depth];
    if (depth + 1 == n) {
      leaf();
    } else {
      ++depth;
      idx[static_cast<std::size_t>(depth)] = -1;
    }
  }
  return best;
}

}  // namespace gridclear::testing
