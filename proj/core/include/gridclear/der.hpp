#pragma once

// Distributed energy resources: bids (consumption) and offers (production).

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gridclear/network.hpp"
#include "gridclear/phase.hpp"

namespace gridclear {

enum class Side : std::uint8_t { Bid, Offer };

std::string_view to_string(Side side);

struct Der {
  std::string id;
  int bus = 0;
  PhaseSet phases = PhaseSet::all();
  double price = 0.0;         // ¢/kWh
  double volume = 0.0;        // kW; negative bids, positive offers
  double power_factor = 1.0;

  Side side() const { return volume < 0.0 ? Side::Bid : Side::Offer; }
};

/// sqrt(1/θ² − 1). Throws DomainError unless 0 < θ ≤ 1.
double reactive_ratio(double power_factor);

/// Equal split of the volume over the connected phases, in p.u.
Vec3 per_phase_injection(const Der& der, double s_base_kva);

/// Objective price: the bid price, or price − M/volume for offers.
double gamma_price(const Der& der, double big_m);

/// DERs validated against a network.
class DerPopulation {
 public:
  DerPopulation() = default;
  /// Throws SchemaError for zero volume, negative price, bad power factor,
  /// duplicate ids, head-bus placement or phases missing at the bus.
  DerPopulation(const Network& network, std::vector<Der> ders);

  const std::vector<Der>& ders() const { return ders_; }
  const Der& operator[](std::size_t i) const { return ders_[i]; }
  std::size_t size() const { return ders_.size(); }
  bool empty() const { return ders_.empty(); }

  double eta(std::size_t i) const { return eta_[i]; }
  /// Per-phase injection of DER i at full volume, in p.u.
  const Vec3& injection(std::size_t i) const { return injection_[i]; }

  /// Node-to-DER incidence: I3 in block (bus − 1, i). Size 3N x 3·(DER count).
  Eigen::MatrixXd a_matrix() const;

  /// Index of the DER with the given id; throws SchemaError if absent.
  std::size_t index_of(std::string_view id) const;

  /// New population holding the DERs of the given side, in original order.
  DerPopulation filter(Side side) const;

 private:
  int bus_count_ = 0;
  std::vector<Der> ders_;
  std::vector<double> eta_;
  std::vector<Vec3> injection_;
};

/// Truncated normal N(mean, sd²) restricted to [lower, upper].
struct TruncatedNormal {
  double mean = 0.0;
  double sd = 1.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// CDF of a truncated normal.
double truncated_normal_cdf(const TruncatedNormal& dist, double x);

struct GenerationSpec {
  std::uint64_t seed = 1;
  int bid_count = 0;
  int offer_count = 0;
  TruncatedNormal bid_volume{20.0, 10.0, 5.0, 45.0};      // consumption, kW
  TruncatedNormal offer_volume{-20.0, 10.0, -45.0, -5.0};  // negated on use
  TruncatedNormal price{15.0, 5.0, 1.0, 25.0};
  double power_factor = 0.9;
  /// Bus labels DERs may be placed at; empty means every non-head bus.
  std::vector<std::string> eligible_buses;
};

/// Draws `count` samples by rejection from the named stream of `seed`.
std::vector<double> sample_truncated_normal(const TruncatedNormal& dist, std::uint64_t seed,
                                            std::string_view stream, std::size_t count);

/// Samples bids then offers; ids are "bid-<k>" and "offer-<k>".
/// Volumes and prices come from the "population" stream, buses and phase
/// subsets from the "placement" stream.
/// Throws ConfigError if no eligible bus exists.
DerPopulation generate_population(const Network& network, const GenerationSpec& spec);

// DER documents (`gridclear-ders/1`).

inline constexpr std::string_view kDerSchema = "gridclear-ders/1";

DerPopulation parse_ders(const Network& network, std::string_view document);
DerPopulation load_ders(const Network& network, const std::filesystem::path& path);
std::string format_ders(const Network& network, const DerPopulation& population);
void save_ders(const Network& network, const DerPopulation& population,
               const std::filesystem::path& path);

/// Reads the generation block of a config or spec document.
GenerationSpec parse_generation_spec(std::string_view document);

}  // namespace gridclear
