#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "council/errors.hpp"
#include "council/game24.hpp"
#include "council/harness.hpp"
#include "council/memory.hpp"
#include "council/planner.hpp"
#include "council/routing.hpp"
#include "council/value.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python package wraps these with
// json.loads/json.dumps.
std::string run_json(const std::string& config_text) {
  const auto config = council::RunConfig::from_json(json::parse(config_text));
  council::RunMetrics m;
  {
    py::gil_scoped_release release;
    m = council::run(config);
  }
  json rows = json::array();
  for (const auto& r : m.warmup_rows) rows.push_back(council::row_to_json(r, true));
  for (const auto& r : m.rows) rows.push_back(council::row_to_json(r, false));
  return json{{"rows", rows}, {"summary", m.summary.to_json()}}.dump();
}

std::string ablation_json(const std::string& config_text, const std::string& axis) {
  const auto config = council::RunConfig::from_json(json::parse(config_text));
  const auto parsed = council::parse_ablation_axis(axis);
  std::vector<council::AblationRow> rows;
  {
    py::gil_scoped_release release;
    rows = council::ablation(config, parsed);
  }
  return council::ablation_to_json(rows).dump();
}

py::tuple oracle(const std::vector<double>& numbers) {
  const auto s = council::game24_oracle(numbers);
  std::vector<std::string> witness;
  for (const auto& a : s.witness) witness.push_back(a.text());
  return py::make_tuple(s.solvable, s.expression, witness);
}

double utility(const std::vector<std::pair<std::size_t, std::optional<bool>>>& ledger, double prior) {
  std::vector<council::LedgerEntry> entries;
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    entries.push_back({"e" + std::to_string(i), ledger[i].first, ledger[i].second});
  }
  return council::sms_utility(entries, prior);
}

std::vector<double> softmax(const std::vector<double>& mu, double temperature) {
  council::RoutingScores s;
  for (std::size_t i = 0; i < mu.size(); ++i) s.experts.push_back(std::to_string(i));
  s.mu = mu;
  return council::routing_distribution(s, temperature).probability;
}

py::dict fuse(const std::vector<double>& llm, const std::vector<double>& sms, const std::string& mode) {
  if (llm.size() != sms.size()) throw council::InvalidInput("signal lists differ in length");
  council::SiblingBatch b;
  for (std::size_t i = 0; i < llm.size(); ++i) {
    council::ValueSignals v;
    v.v_llm = llm[i];
    v.v_sms = sms[i];
    b.children.push_back(v);
  }
  council::fuse_batch(b, council::parse_value_mode(mode));
  py::dict out;
  out["alpha"] = b.alpha;
  out["sigma_llm"] = b.sigma_llm;
  out["sigma_sms"] = b.sigma_sms;
  out["q"] = b.q;
  return out;
}

double uct_value(double q, std::size_t visits, std::size_t parent_visits, double c) {
  council::SearchNode node{.observation = council::Observation("node")};
  node.q = q;
  node.visits = visits;
  return council::uct(node, parent_visits, c);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Expert-council tree search planner";

  py::register_exception<council::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<council::InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<council::ParseFailure>(m, "ParseFailure", PyExc_ValueError);

  m.def("run_json", &run_json, py::arg("config"));
  m.def("ablation_json", &ablation_json, py::arg("config"), py::arg("axis"));
  m.def("game24_oracle", &oracle, py::arg("numbers"));
  m.def("sms_utility", &utility, py::arg("ledger"), py::arg("cold_start_prior") = council::kColdStartPrior);
  m.def("routing_distribution", &softmax, py::arg("mu"), py::arg("temperature") = council::kDefaultRoutingTemperature);
  m.def("fuse", &fuse, py::arg("llm"), py::arg("sms"), py::arg("mode") = "full");
  m.def("uct", &uct_value, py::arg("q"), py::arg("visits"), py::arg("parent_visits"), py::arg("c") = 1.0);
}
