#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "builders.hpp"
#include "gridclear/errors.hpp"
#include "gridclear/pipeline.hpp"
#include "gridclear/scenario.hpp"

namespace gc = gridclear;
namespace gt = gridclear::testing;

namespace {

double edge_value(const gc::PolygonEdge& e, double p, double q, double s) { return e.beta * p + e.delta * q + e.gamma * s; }

double worst_edge(const gc::PolygonApprox& poly, double p, double q, double s) {
  double worst = -INFINITY;
  for (const gc::PolygonEdge& e : poly.edges) worst = std::max(worst, edge_value(e, p, q, s));
  return worst;
}

gc::MarketContext reference_market() {
  return gc::load_market(gc::load_scenario(std::string(GRIDCLEAR_DATA_DIR) + "/ieee123/scenario.json"));
}

}  // namespace

TEST(Polygon, FourEdges) {
  const gc::PolygonApprox poly = gc::polygon_coefficients(4);
  ASSERT_EQ(poly.edges.size(), 4u);
  for (const gc::PolygonEdge& e : poly.edges) EXPECT_NEAR(e.gamma, -std::cos(M_PI / 4), 1e-15);
  EXPECT_LE(worst_edge(poly, 0.70, 0.0, 1.0), 0.0);
  EXPECT_GT(worst_edge(poly, 0.71, 0.0, 1.0), 0.0);
}

TEST(Polygon, TwelveEdgesTouchAtApothem) {
  const gc::PolygonApprox poly = gc::polygon_coefficients(12);
  EXPECT_NEAR(worst_edge(poly, std::cos(M_PI / 12), 0.0, 1.0), 0.0, 1e-15);
}

TEST(Polygon, UnitNormalsAndInscribedVertices) {
  for (int edges : {3, 4, 7, 12, 36}) {
    const gc::PolygonApprox poly = gc::polygon_coefficients(edges);
    for (const gc::PolygonEdge& e : poly.edges) EXPECT_NEAR(e.beta * e.beta + e.delta * e.delta, 1.0, 1e-12);
    // Vertices of the feasible region are intersections of adjacent edges.
    for (std::size_t k = 0; k < poly.edges.size(); ++k) {
      const gc::PolygonEdge& a = poly.edges[k];
      const gc::PolygonEdge& b = poly.edges[(k + 1) % poly.edges.size()];
      const double det = a.beta * b.delta - a.delta * b.beta;
      const double p = (-a.gamma * b.delta + b.gamma * a.delta) / det;
      const double q = (-a.beta * b.gamma + b.beta * a.gamma) / det;
      EXPECT_NEAR(std::hypot(p, q), 1.0, 1e-12);
      EXPECT_LE(worst_edge(poly, p, q, 1.0), 1e-12);
    }
  }
  EXPECT_THROW(gc::polygon_coefficients(2), gc::DomainError);
}

TEST(Assemble, OneBidOnTwoBusFeederRowCount) {
  const gc::MarketContext ctx = gt::make_context(gt::chain_feeder(1, 0.01, 0.01), {gt::make_der("b", 1, "abc", 15, -10)});
  const gc::TdopfProblem prob = ctx.problem();
  // One fraction; three ranged voltage rows, 12 polygon edges on each line
  // phase and each substation phase.
  EXPECT_EQ(prob.lp().cost.size(), 1);
  EXPECT_EQ(prob.lp().rows.rows(), 3 + 36 + 36);
  std::size_t voltage = 0;
  for (const gc::RowTag& t : prob.row_tags()) voltage += t.family == gc::RowFamily::Voltage ? 1 : 0;
  EXPECT_EQ(voltage, 3u);
}

TEST(Assemble, RejectsBadSetup) {
  const gc::MarketContext ctx = gt::make_context(gt::chain_feeder(1, 0.01, 0.01), {gt::make_der("b", 1, "abc", 15, -10)});
  gc::SolveSetup wrong_size;
  wrong_size.clamps.resize(2);
  EXPECT_THROW(ctx.problem(wrong_size), gc::SchemaError);
  gc::SolveSetup out_of_range;
  out_of_range.clamps = {1.5};
  EXPECT_THROW(ctx.problem(out_of_range), gc::DomainError);
  gc::MarketContext bad = ctx;
  bad.params.period_hours = 0.0;
  EXPECT_THROW(bad.problem(), gc::DomainError);
}

TEST(Solve, NoDersUncongested) {
  gc::Network net = gt::chain_feeder(3, 0.01, 0.02);
  std::vector<gc::Bus> buses = net.buses();
  buses[2].fixed_injection_p = gc::Vec3(-0.1, -0.05, -0.02);
  buses[3].fixed_injection_q = gc::Vec3(-0.01, -0.01, -0.01);
  const gc::Network loaded(net.limits(), buses, net.lines());
  const gc::MarketContext ctx = gt::make_context(loaded, std::vector<gc::Der>{});
  const gc::TdopfProblem prob = ctx.problem();
  const gc::TdopfSolution sol = gc::solve(prob);
  ASSERT_TRUE(sol.optimal());
  const double head_cost = ctx.params.network_cost * 1000.0 * ctx.params.period_hours;
  EXPECT_NEAR(sol.objective, head_cost * 0.17, 1e-9);
  EXPECT_NEAR(sol.p0.sum(), 0.17, 1e-15);
  for (Eigen::Index k = 0; k < sol.lambda_p.size(); ++k) {
    EXPECT_NEAR(sol.lambda_p[k], -head_cost, 1e-9);
    EXPECT_NEAR(sol.lambda_q[k], 0.0, 1e-9);
  }
  EXPECT_EQ(sol.mu_v_upper.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.mu_v_lower.cwiseAbs().maxCoeff(), 0.0);
  const gc::KktResiduals r = gc::kkt_residuals(sol, prob);
  EXPECT_LE(r.scaled_max(), 1e-12);
}

TEST(Solve, ClampingEverythingToZeroGivesFixedLoadDispatch) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 10; ++k) {
    const gc::Network net = gt::random_feeder(rng);
    const gc::MarketContext ctx = gt::make_context(net, gt::random_population(rng, net));
    gc::SolveSetup setup;
    setup.clamps.assign(ctx.population->size(), 0.0);
    const gc::TdopfSolution sol = gc::solve(ctx.problem(setup));
    ASSERT_TRUE(sol.optimal());
    const gc::DispatchReport base = gc::dispatch_check(ctx, Eigen::VectorXd::Zero(sol.alpha.size()));
    EXPECT_EQ(sol.alpha.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LT((sol.voltages - base.voltages).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((sol.p_flows - base.p_flows).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Solve, CheapBidOnUncongestedFeederIsAccepted) {
  const gc::MarketContext ctx = gt::make_context(gt::chain_feeder(2, 0.01, 0.01), {gt::make_der("b", 2, "abc", 20, -30)});
  const gc::TdopfSolution sol = gc::solve(ctx.problem());
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.alpha[0], 1.0, 1e-12);
  // Bid pays 20 against a network cost of 2.5 per kWh it pulls through the head.
  EXPECT_NEAR(sol.objective, 20.0 * -30.0 + 2.5 * 30.0, 1e-9);
}

TEST(Solve, ZeroNetGroupBalancesVolumes) {
  const gc::MarketContext ctx = gt::contingent_pair(16.0, 9.0, false);
  gc::SolveSetup setup;
  setup.zero_net_group = {0, 1};
  const gc::TdopfSolution sol = gc::solve(ctx.problem(setup));
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.alpha[0] * -30.0 + sol.alpha[1] * 30.0, 0.0, 1e-9);
}

TEST(Solve, InfeasibleSolveNamesBindingFamilies) {
  gc::Network net = gt::chain_feeder(1, 0.5, 0.0);
  std::vector<gc::Bus> buses = net.buses();
  buses[1].fixed_injection_p = gc::Vec3::Constant(-0.5);
  const gc::MarketContext ctx = gt::make_context(gc::Network(net.limits(), buses, net.lines()), std::vector<gc::Der>{});
  const gc::TdopfSolution sol = gc::solve(ctx.problem());
  EXPECT_EQ(sol.status, gc::SolveStatus::Infeasible);
  EXPECT_FALSE(sol.infeasibility_hint.empty());
  EXPECT_THROW(gc::kkt_residuals(sol, ctx.problem()), gc::StateError);
}

TEST(Kkt, SmallSolvesSatisfyIdentities) {
  std::mt19937_64 rng(21);
  gt::RandomFeederOptions opts;
  opts.min_buses = opts.max_buses = 1;
  for (int k = 0; k < 20; ++k) {
    const gc::Network net = gt::random_feeder(rng, opts);
    const gc::MarketContext ctx = gt::make_context(net, gt::random_population(rng, net));
    const gc::TdopfProblem prob = ctx.problem();
    const gc::TdopfSolution sol = gc::solve(prob);
    ASSERT_TRUE(sol.optimal());
    const gc::KktResiduals r = gc::kkt_residuals(sol, prob);
    EXPECT_LE(r.scaled_max(), 1e-6);
    EXPECT_LE(r.complementarity, 1e-6);
    EXPECT_LE(r.dual_infeasibility, 1e-9);
  }
}

TEST(Kkt, PerturbedMultiplierIsDetected) {
  const gc::MarketContext ctx = gt::contingent_pair(16.0, 9.0, true);
  const gc::TdopfProblem prob = ctx.problem();
  gc::TdopfSolution sol = gc::solve(prob);
  ASSERT_TRUE(sol.optimal());
  EXPECT_LE(gc::kkt_residuals(sol, prob).stationarity_p, 1e-9);
  sol.lambda_p[4] += 1e-3;
  EXPECT_GE(gc::kkt_residuals(sol, prob).stationarity_p, 9e-4);
}

TEST(QualificationPrice, ScalingCancels) {
  const double s = 1000.0, dt = 0.5, k = 12.75;
  const gc::Der bid = gt::make_der("b", 1, "abc", 15, -10);
  const gc::Vec3 lp = gc::Vec3::Constant(-s * dt * k);
  EXPECT_NEAR(gc::qualification_price(bid, lp, gc::Vec3::Zero(), 1000.0, s, dt), k, 1e-12);
}

TEST(QualificationPrice, FullVectorOverloadSelectsBus) {
  const gc::Der offer = gt::make_der("o", 2, "c", 10, 29, 0.9);
  Eigen::VectorXd lp = Eigen::VectorXd::Zero(6), lq = Eigen::VectorXd::Zero(6);
  lp[5] = 21720.0;
  lq[5] = 44460.0;
  EXPECT_NEAR(gc::qualification_price(offer, lp, lq, 1000.0, 1000.0, 1.0), -8.77, 0.01);
  const Eigen::VectorXd short_p = Eigen::VectorXd::Zero(3), short_q = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(gc::qualification_price(offer, short_p, short_q, 1000, 1000, 1), gc::ShapeError);
}

TEST(ReferenceFeeder, FractionalFractionsHaveActiveConstraint) {
  const gc::MarketContext ctx = reference_market();
  const gc::TdopfProblem prob = ctx.problem();
  const gc::TdopfSolution sol = gc::solve(prob);
  ASSERT_TRUE(sol.optimal());
  const gc::lp::Problem& lp = prob.lp();
  const Eigen::VectorXd act = lp.rows * sol.alpha;
  std::size_t fractional = 0;
  for (Eigen::Index i = 0; i < sol.alpha.size(); ++i) {
    if (sol.alpha[i] < 1e-7 || sol.alpha[i] > 1.0 - 1e-7) continue;
    ++fractional;
    bool active = false;
    for (Eigen::Index r = 0; r < act.size() && !active; ++r) {
      if (std::abs(lp.rows(r, i)) < 1e-12) continue;
      const double scale = lp.rows.row(r).cwiseAbs().maxCoeff();
      active = std::abs(act[r] - lp.row_upper[r]) <= 1e-7 * scale || std::abs(act[r] - lp.row_lower[r]) <= 1e-7 * scale;
    }
    EXPECT_TRUE(active) << "DER " << (*ctx.population)[static_cast<std::size_t>(i)].id;
  }
  EXPECT_LE(fractional, static_cast<std::size_t>(act.size()));
}

TEST(ReferenceFeeder, HeadBalanceAndVoltageConsistency) {
  const gc::MarketContext ctx = reference_market();
  const gc::TdopfSolution sol = gc::solve(ctx.problem());
  ASSERT_TRUE(sol.optimal());
  const gc::Network& net = *ctx.feeder.network;
  const gc::DerPopulation& pop = *ctx.population;
  double der_kw = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) der_kw += sol.alpha[static_cast<Eigen::Index>(i)] * pop[i].volume;
  const double fixed_kw = gc::total_fixed_load(net).first;
  EXPECT_NEAR(sol.p0.sum() * net.s_base_kva(), fixed_kw - der_kw, 1e-8);
  // The dispatch recomputed from scratch reproduces the solver's voltages.
  const gc::DispatchReport check = gc::dispatch_check(ctx, sol.alpha);
  EXPECT_LT((check.voltages - sol.voltages).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(check.violation_count(), 0u);
}
