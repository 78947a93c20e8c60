#include <string>

#include "gridclear/errors.hpp"
#include "gridclear/network.hpp"
#include "json_util.hpp"

namespace gridclear {

namespace {

using detail::Json;

int resolve_bus(const Json& ref, const std::vector<Bus>& buses, std::string_view where) {
  if (ref.is_number_integer()) return ref.get<int>();
  if (ref.is_string()) {
    const std::string label = ref.get<std::string>();
    for (const Bus& bus : buses)
      if (bus.label == label) return bus.index;
    throw SchemaError(std::string(where) + " references unknown bus label " + label);
  }
  throw SchemaError(std::string(where) + " bus reference must be an index or a label");
}

}  // namespace

Network parse_network(std::string_view document) {
  const Json doc = detail::parse_json(document, "feeder document");
  detail::expect_schema(doc, kFeederSchema);

  const Json& header = detail::require(doc, "header", "feeder");
  FeederLimits limits;
  limits.s_base_kva = detail::require_number(header, "s_base_kva", "header");
  limits.v_base_kv = detail::require_number(header, "v_base_kv", "header");
  if (!(limits.s_base_kva > 0.0) || !(limits.v_base_kv > 0.0))
    throw SchemaError("header: s_base_kva and v_base_kv must be positive");
  // Documents carry magnitudes; the model works with squared voltages.
  auto squared = [&](std::string_view key) {
    const Vec3 mag = detail::read_vec3(detail::require(header, key, "header"), key);
    return Vec3(mag.cwiseProduct(mag));
  };
  limits.v0 = squared("v0_pu");
  limits.v_min = squared("v_min_pu");
  limits.v_max = squared("v_max_pu");
  limits.s0_max = detail::read_vec3(detail::require(header, "s0_max_kva", "header"), "s0_max_kva") /
                  limits.s_base_kva;

  const double z_base = limits.v_base_kv * limits.v_base_kv * 1000.0 / limits.s_base_kva;

  const Json& bus_list = detail::require(doc, "buses", "feeder");
  if (!bus_list.is_array()) throw SchemaError("feeder.buses must be an array");
  std::vector<Bus> buses;
  buses.reserve(bus_list.size());
  for (const Json& rec : bus_list) {
    Bus bus;
    const Json& index = detail::require(rec, "index", "bus");
    if (!index.is_number_integer() || index.get<int>() < 0)
      throw SchemaError("bus.index must be a non-negative integer");
    bus.index = index.get<int>();
    const std::string where = "bus " + std::to_string(bus.index);
    bus.label = rec.contains("label") ? detail::require_string(rec, "label", where) : std::to_string(bus.index);
    bus.is_head = bus.index == 0;
    if (rec.contains("head") && rec["head"].get<bool>() != bus.is_head)
      throw SchemaError(where + ": only bus 0 may be the head bus");
    bus.phases = rec.contains("phases") ? PhaseSet::parse(detail::require_string(rec, "phases", where))
                                        : PhaseSet::all();
    if (rec.contains("fixed_p_kw"))
      bus.fixed_injection_p = detail::read_vec3(rec["fixed_p_kw"], where + ".fixed_p_kw") / limits.s_base_kva;
    if (rec.contains("fixed_q_kvar"))
      bus.fixed_injection_q = detail::read_vec3(rec["fixed_q_kvar"], where + ".fixed_q_kvar") / limits.s_base_kva;
    buses.push_back(std::move(bus));
  }
  bool has_head = false;
  for (const Bus& bus : buses) has_head = has_head || bus.is_head;
  if (!has_head) throw SchemaError("feeder has no head bus (index 0)");

  const Json& line_list = detail::require(doc, "lines", "feeder");
  if (!line_list.is_array()) throw SchemaError("feeder.lines must be an array");
  std::vector<Line> lines;
  lines.reserve(line_list.size());
  for (std::size_t l = 0; l < line_list.size(); ++l) {
    const Json& rec = line_list[l];
    const std::string where = "line " + std::to_string(l);
    Line line;
    line.from_bus = resolve_bus(detail::require(rec, "from", where), buses, where);
    line.to_bus = resolve_bus(detail::require(rec, "to", where), buses, where);
    line.phases = rec.contains("phases") ? PhaseSet::parse(detail::require_string(rec, "phases", where))
                                         : PhaseSet::all();
    line.r_matrix = detail::read_mat3(detail::require(rec, "r_ohm", where), where + ".r_ohm") / z_base;
    line.x_matrix = detail::read_mat3(detail::require(rec, "x_ohm", where), where + ".x_ohm") / z_base;
    Vec3 s_max_kva;
    if (rec.contains("s_max_kva")) {
      s_max_kva = detail::read_vec3(rec["s_max_kva"], where + ".s_max_kva");
    } else if (rec.contains("ampacity_a")) {
      // Thermal limit per phase at the line-to-neutral base voltage.
      s_max_kva = detail::read_vec3(rec["ampacity_a"], where + ".ampacity_a") * limits.v_base_kv;
    } else {
      throw SchemaError(where + ": needs s_max_kva or ampacity_a");
    }
    if ((s_max_kva.array() < 0.0).any()) throw SchemaError(where + ": negative s_max");
    line.s_max = s_max_kva.cwiseProduct(line.phases.mask()) / limits.s_base_kva;
    lines.push_back(std::move(line));
  }
  return Network(limits, std::move(buses), std::move(lines));
}

Network load_network(const std::filesystem::path& path) {
  return parse_network(detail::read_text(path));
}

}  // namespace gridclear
