#include "gridclear/der.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "gridclear/errors.hpp"
#include "json_util.hpp"

namespace gridclear {

std::string_view to_string(Side side) { return side == Side::Bid ? "bid" : "offer"; }

double reactive_ratio(double power_factor) {
  if (!(power_factor > 0.0 && power_factor <= 1.0))
    throw DomainError("power factor must lie in (0, 1], got " + std::to_string(power_factor));
  return std::sqrt(1.0 / (power_factor * power_factor) - 1.0);
}

Vec3 per_phase_injection(const Der& der, double s_base_kva) {
  const double share = der.volume / (s_base_kva * der.phases.size());
  return der.phases.mask() * share;
}

double gamma_price(const Der& der, double big_m) {
  return der.side() == Side::Bid ? der.price : der.price - big_m / der.volume;
}

DerPopulation::DerPopulation(const Network& network, std::vector<Der> ders)
    : bus_count_(network.size()), ders_(std::move(ders)) {
  std::set<std::string> ids;
  eta_.reserve(ders_.size());
  injection_.reserve(ders_.size());
  for (const Der& der : ders_) {
    const std::string where = "DER " + der.id;
    if (!ids.insert(der.id).second) throw SchemaError("duplicate DER id " + der.id);
    if (der.volume == 0.0 || !std::isfinite(der.volume)) throw SchemaError(where + ": volume must be nonzero");
    if (!(der.price >= 0.0) || !std::isfinite(der.price)) throw SchemaError(where + ": price must be >= 0");
    if (!(der.power_factor > 0.0 && der.power_factor <= 1.0))
      throw SchemaError(where + ": power factor must lie in (0, 1]");
    if (der.bus <= 0 || der.bus > network.size())
      throw SchemaError(where + ": bus must be a non-head bus of the feeder");
    if (der.phases.empty()) throw SchemaError(where + ": empty phase set");
    if (!der.phases.subset_of(network.buses()[static_cast<std::size_t>(der.bus)].phases))
      throw SchemaError(where + ": phases " + der.phases.str() + " not present at its bus");
    eta_.push_back(reactive_ratio(der.power_factor));
    injection_.push_back(per_phase_injection(der, network.s_base_kva()));
  }
}

Eigen::MatrixXd DerPopulation::a_matrix() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * bus_count_, 3 * static_cast<Eigen::Index>(ders_.size()));
  for (std::size_t i = 0; i < ders_.size(); ++i)
    a.block<3, 3>(3 * (ders_[i].bus - 1), 3 * static_cast<Eigen::Index>(i)) = Mat3::Identity();
  return a;
}

std::size_t DerPopulation::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < ders_.size(); ++i)
    if (ders_[i].id == id) return i;
  throw SchemaError("unknown DER id " + std::string(id));
}

DerPopulation DerPopulation::filter(Side side) const {
  DerPopulation out;
  out.bus_count_ = bus_count_;
  for (std::size_t i = 0; i < ders_.size(); ++i) {
    if (ders_[i].side() != side) continue;
    out.ders_.push_back(ders_[i]);
    out.eta_.push_back(eta_[i]);
    out.injection_.push_back(injection_[i]);
  }
  return out;
}

double truncated_normal_cdf(const TruncatedNormal& dist, double x) {
  auto phi = [&](double v) { return 0.5 * std::erfc(-(v - dist.mean) / (dist.sd * std::sqrt(2.0))); };
  if (x <= dist.lower) return 0.0;
  if (x >= dist.upper) return 1.0;
  return (phi(x) - phi(dist.lower)) / (phi(dist.upper) - phi(dist.lower));
}

namespace {

// FNV-1a keeps stream seeds stable across standard library implementations.
std::uint32_t name_hash(std::string_view name) {
  std::uint32_t h = 2166136261u;
  for (char c : name) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 16777619u;
  }
  return h;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::string_view name) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    name_hash(name)};
  return std::mt19937_64(seq);
}

void check_distribution(const TruncatedNormal& dist, std::string_view what) {
  if (!(dist.sd > 0.0) || !(dist.lower < dist.upper))
    throw ConfigError(std::string(what) + ": need sd > 0 and lower < upper");
  // Guard against intervals so far in the tail that rejection never ends.
  if (truncated_normal_cdf({dist.mean, dist.sd, -INFINITY, INFINITY}, dist.upper) -
          truncated_normal_cdf({dist.mean, dist.sd, -INFINITY, INFINITY}, dist.lower) < 1e-6)
    throw ConfigError(std::string(what) + ": truncation interval has negligible mass");
}

double draw(const TruncatedNormal& dist, std::mt19937_64& engine) {
  std::normal_distribution<double> normal(dist.mean, dist.sd);
  for (;;) {
    const double x = normal(engine);
    if (x >= dist.lower && x <= dist.upper) return x;
  }
}

}  // namespace

std::vector<double> sample_truncated_normal(const TruncatedNormal& dist, std::uint64_t seed,
                                            std::string_view stream, std::size_t count) {
  check_distribution(dist, "distribution");
  std::mt19937_64 engine = make_stream(seed, stream);
  std::vector<double> out(count);
  for (double& x : out) x = draw(dist, engine);
  return out;
}

DerPopulation generate_population(const Network& network, const GenerationSpec& spec) {
  if (spec.bid_count < 0 || spec.offer_count < 0) throw ConfigError("DER counts must be non-negative");
  check_distribution(spec.bid_volume, "bid volume");
  check_distribution(spec.offer_volume, "offer volume");
  check_distribution(spec.price, "price");
  if (spec.bid_volume.lower <= 0.0) throw ConfigError("bid volume range must be positive");
  if (spec.offer_volume.upper >= 0.0) throw ConfigError("offer volume range must be negative");
  reactive_ratio(spec.power_factor);

  std::vector<int> eligible;
  if (spec.eligible_buses.empty()) {
    for (int b = 1; b <= network.size(); ++b) eligible.push_back(b);
  } else {
    for (const std::string& label : spec.eligible_buses) {
      auto idx = network.find_label(label);
      if (!idx) throw ConfigError("eligible bus " + label + " is not in the feeder");
      if (*idx == 0) throw ConfigError("DERs cannot sit at the head bus");
      eligible.push_back(*idx);
    }
  }
  if (eligible.empty()) throw ConfigError("no eligible bus for DER placement");

  std::mt19937_64 values = make_stream(spec.seed, "population");
  std::mt19937_64 placement = make_stream(spec.seed, "placement");
  std::uniform_int_distribution<std::size_t> pick_bus(0, eligible.size() - 1);

  std::vector<Der> ders;
  ders.reserve(static_cast<std::size_t>(spec.bid_count + spec.offer_count));
  auto place = [&](Der& der) {
    der.bus = eligible[pick_bus(placement)];
    // Uniform over the nonempty subsets of the phases present at the bus.
    const std::uint8_t present = network.buses()[static_cast<std::size_t>(der.bus)].phases.bits();
    std::vector<std::uint8_t> subsets;
    for (std::uint8_t s = 1; s < 8; ++s)
      if ((s & ~present) == 0) subsets.push_back(s);
    std::uniform_int_distribution<std::size_t> pick_subset(0, subsets.size() - 1);
    der.phases = PhaseSet::from_bits(subsets[pick_subset(placement)]);
  };
  for (int k = 0; k < spec.bid_count; ++k) {
    Der der;
    der.id = "bid-" + std::to_string(k + 1);
    der.volume = -draw(spec.bid_volume, values);
    der.price = draw(spec.price, values);
    der.power_factor = spec.power_factor;
    place(der);
    ders.push_back(std::move(der));
  }
  for (int k = 0; k < spec.offer_count; ++k) {
    Der der;
    der.id = "offer-" + std::to_string(k + 1);
    der.volume = -draw(spec.offer_volume, values);
    der.price = draw(spec.price, values);
    der.power_factor = spec.power_factor;
    place(der);
    ders.push_back(std::move(der));
  }
  return DerPopulation(network, std::move(ders));
}

DerPopulation parse_ders(const Network& network, std::string_view document) {
  using detail::Json;
  const Json doc = detail::parse_json(document, "DER document");
  detail::expect_schema(doc, kDerSchema);
  const Json& list = detail::require(doc, "ders", "DER document");
  if (!list.is_array()) throw SchemaError("ders must be an array");
  std::vector<Der> ders;
  ders.reserve(list.size());
  for (const Json& rec : list) {
    Der der;
    const Json& id = detail::require(rec, "id", "DER");
    der.id = id.is_string() ? id.get<std::string>() : id.dump();
    const std::string where = "DER " + der.id;
    const Json& bus = detail::require(rec, "bus", where);
    if (bus.is_number_integer()) {
      der.bus = bus.get<int>();
    } else if (bus.is_string()) {
      auto idx = network.find_label(bus.get<std::string>());
      if (!idx) throw SchemaError(where + ": unknown bus " + bus.get<std::string>());
      der.bus = *idx;
    } else {
      throw SchemaError(where + ": bus must be an index or a label");
    }
    der.phases = PhaseSet::parse(detail::require_string(rec, "phases", where));
    const std::string side = detail::require_string(rec, "side", where);
    if (side != "bid" && side != "offer") throw SchemaError(where + ": side must be bid or offer");
    const double volume = detail::require_number(rec, "volume_kw", where);
    if (!(volume > 0.0)) throw SchemaError(where + ": volume_kw must be positive");
    der.volume = side == "bid" ? -volume : volume;
    der.price = detail::require_number(rec, "price_cents_per_kwh", where);
    der.power_factor = detail::number_or(rec, "power_factor", 1.0, where);
    ders.push_back(std::move(der));
  }
  return DerPopulation(network, std::move(ders));
}

DerPopulation load_ders(const Network& network, const std::filesystem::path& path) {
  return parse_ders(network, detail::read_text(path));
}

std::string format_ders(const Network& network, const DerPopulation& population) {
  detail::OrderedJson list = detail::OrderedJson::array();
  for (const Der& der : population.ders()) {
    list.push_back({{"id", der.id},
                    {"bus", network.buses()[static_cast<std::size_t>(der.bus)].label},
                    {"phases", der.phases.str()},
                    {"side", to_string(der.side())},
                    {"price_cents_per_kwh", der.price},
                    {"volume_kw", std::abs(der.volume)},
                    {"power_factor", der.power_factor}});
  }
  detail::OrderedJson doc;
  doc["schema"] = kDerSchema;
  doc["ders"] = std::move(list);
  return detail::dump(doc);
}

void save_ders(const Network& network, const DerPopulation& population,
               const std::filesystem::path& path) {
  detail::write_text(path, format_ders(network, population));
}

namespace {

TruncatedNormal read_distribution(const detail::Json& obj, std::string_view key, TruncatedNormal fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  const std::string where(key);
  return {detail::number_or(*it, "mean", fallback.mean, where), detail::number_or(*it, "sd", fallback.sd, where),
          detail::number_or(*it, "min", fallback.lower, where), detail::number_or(*it, "max", fallback.upper, where)};
}

}  // namespace

GenerationSpec parse_generation_spec(std::string_view document) {
  using detail::Json;
  const Json doc = detail::parse_json(document, "generation spec");
  if (!doc.is_object()) throw ConfigError("generation spec must be an object");
  GenerationSpec spec;
  const Json& seed = detail::require(doc, "seed", "generation");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    throw ConfigError("generation.seed must be a non-negative integer");
  spec.seed = seed.get<std::uint64_t>();
  if (auto it = doc.find("bids"); it != doc.end()) {
    spec.bid_count = static_cast<int>(detail::require_number(*it, "count", "bids"));
    spec.bid_volume = read_distribution(*it, "volume_kw", spec.bid_volume);
  }
  if (auto it = doc.find("offers"); it != doc.end()) {
    spec.offer_count = static_cast<int>(detail::require_number(*it, "count", "offers"));
    spec.offer_volume = read_distribution(*it, "volume_kw", spec.offer_volume);
  }
  spec.price = read_distribution(doc, "price_cents_per_kwh", spec.price);
  spec.power_factor = detail::number_or(doc, "power_factor", spec.power_factor, "generation");
  if (auto it = doc.find("eligible_buses"); it != doc.end()) {
    if (!it->is_array()) throw ConfigError("eligible_buses must be an array of labels");
    for (const Json& b : *it) spec.eligible_buses.push_back(b.is_string() ? b.get<std::string>() : b.dump());
  }
  return spec;
}

}  // namespace gridclear
