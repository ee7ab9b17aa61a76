#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include <json.hpp>

#include "aspo/catalog.hpp"
#include "aspo/decision_log.hpp"
#include "aspo/engine.hpp"
#include "aspo/error.hpp"
#include "aspo/gate.hpp"
#include "aspo/stats.hpp"

namespace py = pybind11;
using nlohmann::json;

// Structured values cross the boundary as JSON text; the Python package
// decodes them into dicts and lists.
namespace {

aspo::EngineConfig config_from(const std::string& config_json) {
  return config_json.empty() ? aspo::default_engine_config()
                             : aspo::engine_config_from_json(json::parse(config_json));
}

std::string encode(const std::string& telemetry, const aspo::Catalog& catalog,
                   const std::vector<std::string>& capabilities, const std::string& config_json) {
  auto encoder = config_from(config_json).encoder;
  encoder.capabilities = aspo::LabelSet(capabilities.begin(), capabilities.end());
  return aspo::to_json(aspo::encode_context(aspo::telemetry_from_json(json::parse(telemetry)),
                                            catalog, encoder))
      .dump();
}

std::string choose_portfolio(const std::vector<std::string>& feasible, const std::string& context,
                   const aspo::Catalog& catalog, const std::string& config_json) {
  const auto s = aspo::context_from_json(json::parse(context));
  const auto weights = config_from(config_json).weights;
  weights.validate();
  return aspo::to_json(aspo::select_portfolio(feasible, s, s.budgets, catalog, weights)).dump();
}

std::string check_plan(const std::vector<std::string>& selected, const std::vector<std::string>& order,
                       const std::vector<std::string>& deterministic, const std::string& context,
                       const aspo::Catalog& catalog, const std::string& config_json) {
  const auto s = aspo::context_from_json(json::parse(context));
  const auto weights = config_from(config_json).weights;
  const auto det = aspo::select_portfolio(deterministic, s, s.budgets, catalog, weights);
  const auto det_order = aspo::activation_order(det.members, catalog);
  aspo::MitigationPlan plan{selected, order, ""};
  return aspo::to_json(aspo::validate_plan(plan, det, det_order, s.budgets, catalog)).dump();
}

py::tuple decide(const std::string& telemetry, const aspo::Catalog& catalog, const std::string& node,
                 std::uint64_t epoch, const std::string& backend_selector,
                 std::optional<std::uint64_t> seed, const std::string& config_json) {
  const auto config = config_from(config_json);
  const auto x = aspo::telemetry_from_json(json::parse(telemetry));
  auto backend = aspo::make_backend(backend_selector, catalog, config.remote);
  aspo::DecisionTrace trace;
  {
    py::gil_scoped_release release;
    trace = aspo::run_epoch(x, config.node(node), epoch, catalog, config, *backend,
                            seed.value_or(config.seed));
  }
  return py::make_tuple(aspo::to_json(trace).dump(),
                        aspo::render_decision_log(trace, x, catalog, config.weights));
}

std::string replay(const std::string& dataset_path, const aspo::Catalog& catalog, std::size_t workload,
                   std::size_t nodes, const std::string& backend_selector,
                   std::optional<std::uint64_t> seed, const std::string& config_json) {
  if (nodes == 0 || workload == 0 || workload % nodes != 0) {
    throw aspo::ConfigError("workload must be a positive multiple of the node count");
  }
  const auto config = config_from(config_json);
  const auto dataset = aspo::load_dataset_csv(dataset_path);
  auto backend = aspo::make_backend(backend_selector, catalog, config.remote);
  std::ostringstream out;
  {
    py::gil_scoped_release release;
    const auto log = aspo::run_replay(dataset, nodes, workload / nodes, catalog, config, *backend,
                                      seed.value_or(config.seed));
    aspo::write_trace_lines(out, log);
  }
  return out.str();
}

std::vector<json> parse_records(const std::string& records) {
  std::vector<json> out;
  for (auto& r : json::parse(records)) out.push_back(std::move(r));
  return out;
}

std::string summarize(const std::string& records, const aspo::Catalog* catalog) {
  return aspo::to_json(aspo::summarize_run(parse_records(records), catalog)).dump();
}

std::string compare(const std::string& a, const std::string& b, const aspo::Catalog* catalog) {
  return aspo::to_json(aspo::compare_runs(aspo::summarize_run(parse_records(a), catalog),
                                          aspo::summarize_run(parse_records(b), catalog)))
      .dump();
}

}  // namespace

PYBIND11_MODULE(_aspo, m) {
  auto error = py::register_exception<aspo::Error>(m, "AspoError");
  py::register_exception<aspo::CatalogError>(m, "CatalogError", error.ptr());
  py::register_exception<aspo::ConfigError>(m, "ConfigError", error.ptr());

  py::class_<aspo::Catalog>(m, "Catalog")
      .def("__len__", &aspo::Catalog::size)
      .def("__contains__", &aspo::Catalog::contains)
      .def_property_readonly("ids", [](const aspo::Catalog& c) {
        std::vector<std::string> ids;
        for (const auto& p : c.patterns()) ids.push_back(p.id);
        return ids;
      })
      .def("name", [](const aspo::Catalog& c, const std::string& id) { return c.pattern(id).name; })
      .def("conflicts", [](const aspo::Catalog& c, const std::string& a, const std::string& b) {
        return c.conflicts(c.index_of(a), c.index_of(b));
      })
      .def("synergizes", [](const aspo::Catalog& c, const std::string& a, const std::string& b) {
        return c.synergizes(c.index_of(a), c.index_of(b));
      });

  m.def("load_catalog", [](const std::string& path) { return aspo::load_catalog_file(path); },
        py::arg("path"));
  m.def("load_catalog_text", [](const std::string& doc) { return aspo::load_catalog(doc); },
        py::arg("document"));
  m.def("default_config", [] { return aspo::to_json(aspo::default_engine_config()).dump(); });

  m.def("encode_context", &encode, py::arg("telemetry"), py::arg("catalog"),
        py::arg("capabilities"), py::arg("config") = "");
  m.def("select_portfolio", &choose_portfolio, py::arg("feasible"), py::arg("context"), py::arg("catalog"),
        py::arg("config") = "");
  m.def("activation_order",
        [](const std::vector<std::string>& members, const aspo::Catalog& c) {
          return aspo::activation_order(members, c);
        },
        py::arg("members"), py::arg("catalog"));
  m.def("validate_plan", &check_plan, py::arg("selected"), py::arg("order"), py::arg("feasible"),
        py::arg("context"),
        py::arg("catalog"), py::arg("config") = "");
  m.def("decide", &decide, py::arg("telemetry"), py::arg("catalog"), py::arg("node"),
        py::arg("epoch"), py::arg("backend"), py::arg("seed"), py::arg("config"));
  m.def("replay", &replay, py::arg("dataset"), py::arg("catalog"), py::arg("workload"),
        py::arg("nodes"), py::arg("backend"), py::arg("seed"), py::arg("config"));
  m.def("summarize", &summarize, py::arg("records"), py::arg("catalog") = nullptr);
  m.def("compare", &compare, py::arg("a"), py::arg("b"), py::arg("catalog") = nullptr);

  m.def("exact_binomial_ci",
        [](std::size_t k, std::size_t n, double level) {
          const auto ci = aspo::exact_binomial_ci(k, n, level);
          return std::make_pair(ci.lo, ci.hi);
        },
        py::arg("k"), py::arg("n"), py::arg("level") = 0.95);
  m.def("fisher_exact_two_sided", &aspo::fisher_exact_two_sided);
  m.def("risk_and_odds_ratio", [](std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2) {
    const auto r = aspo::risk_and_odds_ratio(k1, n1, k2, n2);
    return std::make_pair(r.risk_ratio, r.odds_ratio);
  });
  m.def("spearman_rank", [](const std::vector<double>& x, const std::vector<double>& y) {
    return aspo::spearman_rank(x, y);
  });
  m.def("ks_distance", [](const std::vector<double>& a, const std::vector<double>& b) {
    return aspo::ks_distance(a, b);
  });
}
