#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "builders.hpp"
#include "gridclear/der.hpp"
#include "gridclear/errors.hpp"

namespace gc = gridclear;
namespace gt = gridclear::testing;

TEST(ReactiveRatio, KnownValues) {
  EXPECT_EQ(gc::reactive_ratio(1.0), 0.0);
  EXPECT_NEAR(gc::reactive_ratio(0.9), 0.4843, 5e-5);
  EXPECT_NEAR(gc::reactive_ratio(0.5), std::sqrt(3.0), 1e-12);
  EXPECT_THROW(gc::reactive_ratio(0.0), gc::DomainError);
  EXPECT_THROW(gc::reactive_ratio(1.01), gc::DomainError);
}

TEST(PerPhaseInjection, SplitsOverConnectedPhases) {
  EXPECT_TRUE(gc::per_phase_injection(gt::make_der("d", 1, "ab", 10, -30), 1000).isApprox(gc::Vec3(-0.015, -0.015, 0)));
  EXPECT_TRUE(gc::per_phase_injection(gt::make_der("d", 1, "c", 10, 29), 1000).isApprox(gc::Vec3(0, 0, 0.029)));
  EXPECT_TRUE(gc::per_phase_injection(gt::make_der("d", 1, "abc", 10, 45), 1000).isApprox(gc::Vec3::Constant(0.015)));
}

TEST(GammaPrice, OffersCarryPreference) {
  EXPECT_EQ(gc::gamma_price(gt::make_der("b", 1, "a", 15, -10), 1000), 15.0);
  EXPECT_DOUBLE_EQ(gc::gamma_price(gt::make_der("o", 1, "a", 10, 20), 1000), -40.0);
  EXPECT_NEAR(gc::gamma_price(gt::make_der("o", 1, "a", 18.6, 29), 1000), 18.6 - 1000.0 / 29.0, 1e-12);
  EXPECT_NEAR(gc::gamma_price(gt::make_der("o", 1, "a", 18.6, 29), 1000), -15.8828, 5e-5);
}

TEST(DerPopulation, ValidatesEachRecord) {
  const gc::Network net = gt::chain_feeder(2, 0.01, 0.01);
  auto build = [&](gc::Der d) { return gc::DerPopulation(net, {d}); };
  EXPECT_THROW(build(gt::make_der("z", 1, "a", 5, 0)), gc::SchemaError);
  EXPECT_THROW(build(gt::make_der("n", 1, "a", -1, 5)), gc::SchemaError);
  EXPECT_THROW(build(gt::make_der("h", 0, "a", 5, 5)), gc::SchemaError);
  EXPECT_THROW(build(gt::make_der("f", 1, "a", 5, 5, 0.0)), gc::SchemaError);
  EXPECT_THROW(gc::DerPopulation(net, {gt::make_der("x", 1, "a", 5, 5), gt::make_der("x", 2, "a", 5, 5)}),
               gc::SchemaError);

  std::vector<gc::Bus> buses(2);
  buses[0].is_head = true;
  buses[1].index = 1;
  buses[1].phases = gc::PhaseSet::parse("a");
  gc::Line l;
  l.to_bus = 1;
  l.phases = gc::PhaseSet::parse("a");
  l.r_matrix(0, 0) = 0.01;
  l.s_max[0] = 1.0;
  const gc::Network lateral(gt::reference_limits(), buses, {l});
  EXPECT_THROW(gc::DerPopulation(lateral, {gt::make_der("p", 1, "ab", 5, 5)}), gc::SchemaError);
}

TEST(DerPopulation, IncidenceHasOneIdentityBlockPerDer) {
  const gc::Network net = gt::chain_feeder(3, 0.01, 0.01);
  const gc::DerPopulation pop(net, {gt::make_der("a", 2, "ab", 5, -10), gt::make_der("b", 3, "c", 5, 10)});
  const Eigen::MatrixXd a = pop.a_matrix();
  ASSERT_EQ(a.rows(), 9);
  ASSERT_EQ(a.cols(), 6);
  EXPECT_TRUE(a.block(3, 0, 3, 3).isIdentity());
  EXPECT_TRUE(a.block(6, 3, 3, 3).isIdentity());
  EXPECT_EQ(a.sum(), 6.0);
  EXPECT_EQ(pop.index_of("b"), 1u);
  EXPECT_THROW(pop.index_of("c"), gc::SchemaError);
  EXPECT_EQ(pop.filter(gc::Side::Offer).size(), 1u);
  EXPECT_EQ(pop.filter(gc::Side::Offer)[0].id, "b");
}

TEST(Generation, SameSeedSamePopulation) {
  const gc::Network net = gc::load_network(std::string(GRIDCLEAR_DATA_DIR) + "/ieee123/feeder.json");
  gc::GenerationSpec spec;
  spec.seed = 42;
  spec.bid_count = 6;
  spec.offer_count = 4;
  const std::string first = gc::format_ders(net, gc::generate_population(net, spec));
  EXPECT_EQ(first, gc::format_ders(net, gc::generate_population(net, spec)));
  spec.seed = 43;
  EXPECT_NE(first, gc::format_ders(net, gc::generate_population(net, spec)));
}

TEST(Generation, DrawsStayInsideTruncationBounds) {
  const gc::Network net = gc::load_network(std::string(GRIDCLEAR_DATA_DIR) + "/ieee123/feeder.json");
  gc::GenerationSpec spec;
  spec.bid_count = 300;
  spec.offer_count = 300;
  const gc::DerPopulation pop = gc::generate_population(net, spec);
  ASSERT_EQ(pop.size(), 600u);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const gc::Der& d = pop[i];
    EXPECT_GE(d.price, 1.0);
    EXPECT_LE(d.price, 25.0);
    EXPECT_GE(std::abs(d.volume), 5.0);
    EXPECT_LE(std::abs(d.volume), 45.0);
    EXPECT_EQ(d.side(), i < 300 ? gc::Side::Bid : gc::Side::Offer);
    EXPECT_TRUE(d.phases.subset_of(net.buses()[static_cast<std::size_t>(d.bus)].phases));
  }
}

TEST(Generation, EligibleBusesRestrictPlacement) {
  const gc::Network net = gc::load_network(std::string(GRIDCLEAR_DATA_DIR) + "/ieee123/feeder.json");
  gc::GenerationSpec spec;
  spec.bid_count = 20;
  spec.eligible_buses = {"65", "76"};
  const gc::DerPopulation pop = gc::generate_population(net, spec);
  for (const gc::Der& d : pop.ders()) {
    const std::string& label = net.buses()[static_cast<std::size_t>(d.bus)].label;
    EXPECT_TRUE(label == "65" || label == "76") << label;
  }
  spec.eligible_buses = {"150"};
  EXPECT_THROW(gc::generate_population(net, spec), gc::ConfigError);
}

TEST(Generation, KolmogorovSmirnovAgainstClosedForm) {
  const gc::TruncatedNormal price{15.0, 5.0, 1.0, 25.0};
  const gc::TruncatedNormal volume{20.0, 10.0, 5.0, 45.0};
  for (const gc::TruncatedNormal& dist : {price, volume}) {
    std::vector<double> xs = gc::sample_truncated_normal(dist, 7, "ks", 100000);
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double f = gc::truncated_normal_cdf(dist, xs[i]);
      ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    EXPECT_LE(ks, 0.01);
  }
}

TEST(TruncatedNormalCdf, EndpointsAndMidpoint) {
  const gc::TruncatedNormal d{15.0, 5.0, 1.0, 25.0};
  EXPECT_EQ(gc::truncated_normal_cdf(d, 0.0), 0.0);
  EXPECT_EQ(gc::truncated_normal_cdf(d, 30.0), 1.0);
  // (Φ(0) − Φ(−2.8)) / (Φ(2) − Φ(−2.8)): the tighter upper cut pulls the median below the mean.
  EXPECT_NEAR(gc::truncated_normal_cdf(d, 15.0), 0.510360, 1e-6);
}

TEST(DerDocuments, RoundTrip) {
  const gc::Network net = gt::chain_feeder(3, 0.01, 0.01);
  const gc::DerPopulation pop(net, {gt::make_der("a", 2, "ab", 5.25, -10.5, 0.95), gt::make_der("b", 3, "c", 7, 12)});
  const std::string doc = gc::format_ders(net, pop);
  EXPECT_NE(doc.find(gc::kDerSchema), std::string::npos);
  const gc::DerPopulation back = gc::parse_ders(net, doc);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].id, pop[i].id);
    EXPECT_EQ(back[i].bus, pop[i].bus);
    EXPECT_EQ(back[i].phases, pop[i].phases);
    EXPECT_EQ(back[i].price, pop[i].price);
    EXPECT_EQ(back[i].volume, pop[i].volume);
    EXPECT_EQ(back[i].power_factor, pop[i].power_factor);
  }
  EXPECT_EQ(gc::format_ders(net, back), doc);
  EXPECT_THROW(gc::parse_ders(net, R"({"schema": "gridclear-ders/9", "ders": []})"), gc::SchemaError);
}
