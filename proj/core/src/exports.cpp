#include "gridclear/exports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "json_util.hpp"

namespace gridclear {

using detail::Json;
using detail::OrderedJson;

namespace {

std::string bus_label(const Network& net, int bus) { return net.buses()[static_cast<std::size_t>(bus)].label; }

// ¢/p.u. per period to ¢/kWh.
double per_kwh(const Network& net, double value, double period_hours) {
  return value / (net.s_base_kva() * period_hours);
}

OrderedJson solution_json(const Network& net, const RunResult& run, const std::string& label,
                          const TdopfSolution& sol, double period_hours) {
  const DerPopulation& pop = *run.population;
  OrderedJson j;
  j["label"] = label;
  j["status"] = to_string(sol.status);
  j["objective_cents"] = sol.objective;
  j["alpha"] = OrderedJson::array();
  if (!sol.optimal()) return j;

  for (std::size_t i = 0; i < pop.size(); ++i)
    j["alpha"].push_back({{"der_id", pop[i].id}, {"alpha", sol.alpha[static_cast<Eigen::Index>(i)]}});

  OrderedJson buses = OrderedJson::array();
  OrderedJson lines = OrderedJson::array();
  for (int bus = 1; bus <= net.size(); ++bus) {
    const Line& line = net.lines()[static_cast<std::size_t>(bus - 1)];
    for (Phase ph : kAllPhases) {
      const int k = 3 * (bus - 1) + slot(ph);
      if (net.buses()[static_cast<std::size_t>(bus)].phases.contains(ph)) {
        buses.push_back({{"bus", bus_label(net, bus)},
                         {"phase", std::string(1, to_char(ph))},
                         {"v_pu", std::sqrt(std::max(0.0, sol.voltages[k]))},
                         {"lambda_p_cents_per_kwh", per_kwh(net, sol.lambda_p[k], period_hours)},
                         {"lambda_q_cents_per_kwh", per_kwh(net, sol.lambda_q[k], period_hours)}});
      }
      if (line.phases.contains(ph)) {
        lines.push_back({{"from", bus_label(net, line.from_bus)},
                         {"to", bus_label(net, line.to_bus)},
                         {"phase", std::string(1, to_char(ph))},
                         {"p_kw", sol.p_flows[k] * net.s_base_kva()},
                         {"q_kvar", sol.q_flows[k] * net.s_base_kva()}});
      }
    }
  }
  j["buses"] = std::move(buses);
  j["lines"] = std::move(lines);
  return j;
}

OrderedJson voltage_rows(const Network& net, const Eigen::VectorXd& v) {
  OrderedJson rows = OrderedJson::array();
  for (int bus = 1; bus <= net.size(); ++bus)
    for (Phase ph : kAllPhases)
      if (net.buses()[static_cast<std::size_t>(bus)].phases.contains(ph))
        rows.push_back({{"bus", bus_label(net, bus)},
                        {"phase", std::string(1, to_char(ph))},
                        {"v_pu", std::sqrt(std::max(0.0, v[3 * (bus - 1) + slot(ph)]))}});
  return rows;
}

OrderedJson steps_json(const std::vector<CurveStep>& steps) {
  OrderedJson out = OrderedJson::array();
  for (const CurveStep& s : steps)
    out.push_back({{"id", s.id},
                   {"price_cents_per_kwh", s.price},
                   {"quantity_kw", s.quantity},
                   {"cumulative_kw", s.cumulative}});
  return out;
}

OrderedJson curves_json(const Curves& c) { return {{"bids", steps_json(c.bids)}, {"offers", steps_json(c.offers)}}; }

OrderedJson cleared_json(const DerPopulation& pop, const std::vector<std::size_t>& ids, const Eigen::VectorXd& alpha) {
  OrderedJson out = OrderedJson::array();
  for (std::size_t i : ids)
    out.push_back({{"der_id", pop[i].id},
                   {"alpha", alpha[static_cast<Eigen::Index>(i)]},
                   {"quantity_kw", alpha[static_cast<Eigen::Index>(i)] * pop[i].volume}});
  return out;
}

OrderedJson id_list(const DerPopulation& pop, const std::vector<std::size_t>& ids) {
  OrderedJson out = OrderedJson::array();
  for (std::size_t i : ids) out.push_back(pop[i].id);
  return out;
}

OrderedJson polygon_rows(const Network& net, const std::vector<PolygonViolation>& rows, bool substation) {
  OrderedJson out = OrderedJson::array();
  for (const PolygonViolation& v : rows) {
    OrderedJson r;
    if (!substation) {
      const Line& line = net.lines()[static_cast<std::size_t>(v.line_or_phase)];
      r["from"] = bus_label(net, line.from_bus);
      r["to"] = bus_label(net, line.to_bus);
    }
    r["phase"] = std::string(1, to_char(v.phase));
    r["edge"] = v.edge;
    r["excess_kva"] = v.excess * net.s_base_kva();
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string csv_field(const Json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  if (value.is_number()) return format_number(value.get<double>());
  return "";
}

const Json& read_export(const std::filesystem::path& path, std::string_view schema, Json& holder) {
  holder = detail::parse_json(detail::read_text(path), path.filename().string());
  detail::expect_schema(holder, schema);
  return holder;
}

}  // namespace

std::string solution_document(const Network& network, const RunResult& run) {
  OrderedJson doc;
  doc["schema"] = kSolutionSchema;
  doc["case"] = to_string(run.selector);
  doc["solves"] = OrderedJson::array();
  const double dt = run.params.period_hours;
  for (const auto& [label, sol] : run.solves) doc["solves"].push_back(solution_json(network, run, label, sol, dt));
  doc["final_voltages"] = voltage_rows(network, run.dispatch.voltages);
  return detail::dump(doc);
}

std::string outcome_document(const Network& network, const RunResult& run) {
  const double markup = run.params.network_cost;
  const DerPopulation& pop = *run.population;
  const WpmOutcome& out = run.outcome;
  OrderedJson doc;
  doc["schema"] = kOutcomeSchema;
  doc["case"] = to_string(run.selector);
  doc["lmp_cents_per_kwh"] = out.lmp;
  doc["network_cost_cents_per_kwh"] = markup;

  OrderedJson quotes = OrderedJson::array();
  for (const IdsoQuote& q : run.quotes)
    quotes.push_back({{"der_id", q.id},
                      {"side", std::string(to_string(q.side))},
                      {"price_cents_per_kwh", q.price},
                      {"quantity_kw", q.quantity}});
  doc["quotes"] = std::move(quotes);
  doc["curves"] = curves_json(run.curves);
  if (run.curves_without_cost) doc["curves_without_network_cost"] = curves_json(*run.curves_without_cost);

  const Eigen::VectorXd& alpha = out.final_alpha;
  doc["cleared"] = {{"bids", cleared_json(pop, out.cleared_bids, alpha)},
                    {"offers", cleared_json(pop, out.cleared_offers, alpha)},
                    {"mutually_contingent", cleared_json(pop, out.cleared_mc, alpha)}};

  OrderedJson mc;
  if (run.bins) {
    mc["keys"] = id_list(pop, run.bins->mc_keys);
    mc["members"] = id_list(pop, run.bins->mc_members());
  } else {
    mc["keys"] = OrderedJson::array();
    mc["members"] = OrderedJson::array();
  }
  mc["cost_recovering"] = id_list(pop, out.filtered_mc);
  mc["rectified"] = out.rectified;
  mc["diagnostic"] = out.diagnostic;
  doc["mutually_contingent"] = std::move(mc);

  doc["scheduled_net_interchange_kw"] = out.scheduled_net_interchange;
  doc["mismatched"] = id_list(pop, run.mismatched);

  const DispatchReport& d = run.dispatch;
  OrderedJson head = OrderedJson::array();
  for (int ph = 0; ph < 3; ++ph)
    head.push_back({{"phase", std::string(1, to_char(kAllPhases[static_cast<std::size_t>(ph)]))},
                    {"p_kw", d.p0[ph] * network.s_base_kva()},
                    {"q_kvar", d.q0[ph] * network.s_base_kva()}});
  OrderedJson volts = OrderedJson::array();
  for (const VoltageViolation& v : d.voltage)
    volts.push_back({{"bus", bus_label(network, v.bus)},
                     {"phase", std::string(1, to_char(v.phase))},
                     {"v_pu", std::sqrt(std::max(0.0, v.v))},
                     {"limit_pu", std::sqrt(v.limit)}});
  doc["dispatch"] = {{"head_injection", std::move(head)},
                     {"violation_count", d.violation_count()},
                     {"voltage_violations", std::move(volts)},
                     {"line_violations", polygon_rows(network, d.line, false)},
                     {"substation_violations", polygon_rows(network, d.substation, true)}};
  return detail::dump(doc);
}

std::string retail_document(const RunResult& run) {
  const DerPopulation& pop = *run.population;
  OrderedJson doc;
  doc["schema"] = kRetailSchema;
  doc["case"] = to_string(run.selector);
  OrderedJson records = OrderedJson::array();
  for (const RetailSignal& s : run.retail)
    records.push_back({{"der_id", s.id},
                       {"side", std::string(to_string(s.side))},
                       {"qualified", s.qualified},
                       {"cleared", s.cleared},
                       {"der_price_cents_per_kwh", pop[s.der].price},
                       {"retail_price_cents_per_kwh", s.price},
                       {"retail_quantity_kw", s.quantity},
                       {"qualification_price_cents_per_kwh", s.qualification_price}});
  doc["records"] = std::move(records);
  return detail::dump(doc);
}

std::vector<std::string> write_exports(const Network& network, const RunResult& run,
                                       const std::filesystem::path& dir) {
  std::vector<std::string> files;
  auto put = [&](const std::string& name, const std::string& text) {
    detail::write_text(dir / name, text);
    files.push_back(name);
  };
  put("ders.json", format_ders(network, *run.population));
  put("solution.json", solution_document(network, run));
  put("outcome.json", outcome_document(network, run));
  put("retail.json", retail_document(run));
  return files;
}

std::vector<std::string> emit_plot_data(const std::filesystem::path& run_dir) {
  Json solution_holder, outcome_holder, retail_holder;
  const Json& solution = read_export(run_dir / "solution.json", kSolutionSchema, solution_holder);
  const Json& outcome = read_export(run_dir / "outcome.json", kOutcomeSchema, outcome_holder);
  const Json& retail = read_export(run_dir / "retail.json", kRetailSchema, retail_holder);

  auto row = [](std::initializer_list<std::string> cells) {
    std::string line;
    for (const std::string& c : cells) line += (line.empty() ? "" : ",") + c;
    return line + "\n";
  };
  std::vector<std::string> files;

  std::string volts = row({"series", "bus", "phase", "v_pu"});
  for (const Json& s : solution.at("solves"))
    if (s.contains("buses"))
      for (const Json& b : s.at("buses"))
        volts += row({s.at("label").get<std::string>(), csv_field(b.at("bus")), csv_field(b.at("phase")),
                      csv_field(b.at("v_pu"))});
  for (const Json& b : solution.at("final_voltages"))
    volts += row({"final", csv_field(b.at("bus")), csv_field(b.at("phase")), csv_field(b.at("v_pu"))});
  detail::write_text(run_dir / "voltages.csv", volts);
  files.push_back("voltages.csv");

  // Bids read their multipliers from the bids-only solve, offers from the
  // offers-only solve.
  std::string nqp = row({"series", "bus", "phase", "lambda_p_cents_per_kwh", "lambda_q_cents_per_kwh"});
  for (const Json& s : solution.at("solves")) {
    const std::string label = s.at("label").get<std::string>();
    const char* series = label == "A" ? "bids" : label == "B" ? "offers" : nullptr;
    if (!series || !s.contains("buses")) continue;
    for (const Json& b : s.at("buses"))
      nqp += row({series, csv_field(b.at("bus")), csv_field(b.at("phase")), csv_field(b.at("lambda_p_cents_per_kwh")),
                  csv_field(b.at("lambda_q_cents_per_kwh"))});
  }
  detail::write_text(run_dir / "nqp.csv", nqp);
  files.push_back("nqp.csv");

  std::string curves = row({"series", "der_id", "price_cents_per_kwh", "quantity_kw", "cumulative_kw"});
  auto add_curves = [&](const Json& c, const std::string& suffix) {
    for (const char* side : {"bids", "offers"})
      for (const Json& s : c.at(side))
        curves += row({side + suffix, csv_field(s.at("id")), csv_field(s.at("price_cents_per_kwh")),
                       csv_field(s.at("quantity_kw")), csv_field(s.at("cumulative_kw"))});
  };
  add_curves(outcome.at("curves"), "");
  if (outcome.contains("curves_without_network_cost"))
    add_curves(outcome.at("curves_without_network_cost"), "_without_network_cost");
  detail::write_text(run_dir / "curves.csv", curves);
  files.push_back("curves.csv");

  std::string cmp = row({"der_id", "side", "der_price_cents_per_kwh", "qualification_price_cents_per_kwh",
                         "retail_price_cents_per_kwh", "qualified", "cleared", "retail_quantity_kw"});
  for (const Json& r : retail.at("records"))
    cmp += row({csv_field(r.at("der_id")), csv_field(r.at("side")), csv_field(r.at("der_price_cents_per_kwh")),
                csv_field(r.at("qualification_price_cents_per_kwh")), csv_field(r.at("retail_price_cents_per_kwh")),
                csv_field(r.at("qualified")), csv_field(r.at("cleared")), csv_field(r.at("retail_quantity_kw"))});
  detail::write_text(run_dir / "retail.csv", cmp);
  files.push_back("retail.csv");
  return files;
}

}  // namespace gridclear
