// SPDX-License-Identifier: Apache-2.0
//
// pybind11 bindings. JSON-shaped results (reports, turn traces, epoch logs)
// cross the boundary as Python dicts via json.loads.
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "mad/corpus_io.hpp"
#include "mad/datagen.hpp"
#include "mad/error.hpp"
#include "mad/evaluation.hpp"
#include "mad/model_io.hpp"
#include "mad/service.hpp"
#include "mad/training.hpp"

namespace py = pybind11;
using namespace mad;

namespace {

py::object loads(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

TrainConfig make_config(const py::dict& settings) {
  TrainConfig c;
  for (const auto& [k, v] : settings) {
    set_config_value(c, py::str(k), py::str(v));
  }
  c.validate();
  return c;
}

const std::vector<Session>& split_of(const Dataset& d, const std::string& name) {
  if (name == "train") return d.corpus.train;
  if (name == "dev") return d.corpus.dev;
  if (name == "test") return d.corpus.test;
  throw ConfigError("unknown split '" + name + "' (expected train, dev or test)");
}

/// One interactive dialogue against a model.
class Dialogue {
 public:
  explicit Dialogue(std::shared_ptr<const Model> model)
      : sessions_(std::move(model)), id_(sessions_.create()) {}
  py::object step(const std::string& utterance) {
    return loads(sessions_.submit(id_, utterance).dump());
  }
  py::object transcript() { return loads(sessions_.transcript(id_).dump()); }
  void reset() {
    sessions_.remove(id_);
    id_ = sessions_.create();
  }

 private:
  SessionManager sessions_;
  std::string id_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Memory-augmented dialogue manager";

  static py::exception<Error> error(m, "MadError");
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<HashMismatchError>(m, "HashMismatchError", error.ptr());

  py::class_<Ontology>(m, "Ontology")
      .def_property_readonly("slots",
                             [](const Ontology& o) {
                               std::vector<std::pair<std::string, std::vector<std::string>>> out;
                               for (const auto& s : o.slots) out.emplace_back(s.name, s.values);
                               return out;
                             })
      .def_readonly("act_types", &Ontology::act_types)
      .def("hash", &Ontology::hash)
      .def("to_json", [](const Ontology& o) { return ontology_to_json(o); });

  m.def(
      "restaurant_ontology",
      [](std::size_t cuisines, std::size_t locations, std::size_t prices, std::size_t sizes) {
        RestaurantConfig c;
        c.cuisines = cuisines;
        c.locations = locations;
        c.prices = prices;
        c.sizes = sizes;
        return build_restaurant_ontology(c);
      },
      py::arg("cuisines") = 10, py::arg("locations") = 10, py::arg("prices") = 3,
      py::arg("sizes") = 4);
  m.def("flight_ontology",
        [](std::size_t cities, std::size_t dates) { return build_flight_ontology({cities, dates}); },
        py::arg("cities") = 174, py::arg("dates") = 100);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("ontology", &Dataset::ontology)
      .def("size", [](const Dataset& d, const std::string& s) { return split_of(d, s).size(); })
      .def("turns",
           [](const Dataset& d, const std::string& s) {
             std::size_t n = 0;
             for (const auto& session : split_of(d, s)) n += session.turns.size();
             return n;
           })
      .def("save", [](const Dataset& d, const std::string& dir) { write_dataset(dir, d); });

  m.def(
      "generate",
      [](const std::string& domain, const std::string& task, std::size_t train,
         std::size_t dev, std::size_t test, std::uint64_t seed, std::size_t cities,
         std::size_t dates) {
        GenConfig g;
        g.domain = parse_domain(domain);
        g.task = parse_task(task);
        g.sizes = {train, dev, test};
        g.seed = seed;
        g.flight = {cities, dates};
        Dataset d;
        d.ontology = build_ontology(g);
        d.corpus = generate_corpus(d.ontology, g);
        return d;
      },
      py::arg("domain") = "restaurant", py::arg("task") = "1", py::arg("train") = 1000,
      py::arg("dev") = 1000, py::arg("test") = 1000, py::arg("seed") = 42,
      py::arg("cities") = 174, py::arg("dates") = 100);
  m.def("load_dataset", [](const std::string& dir) { return read_dataset(dir); });

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def_property_readonly("variant", [](const Model& x) { return x.config().variant_name(); })
      .def_property_readonly("ontology", &Model::ontology)
      .def_property_readonly("vocab_size", [](const Model& x) { return x.vocab().size(); })
      .def("parameter_count",
           [](const Model& x) {
             std::size_t n = 0;
             for (const auto& p : x.params().all()) n += p.value.size();
             return n;
           })
      .def("save", [](const Model& x, const std::string& path) { save_model(path, x); })
      .def_static("load",
                  [](const std::string& path, const Ontology& o) {
                    return std::make_shared<Model>(load_model(path, o));
                  })
      .def("evaluate",
           [](const Model& x, const Dataset& d, const std::string& split) {
             return loads(evaluate(x, d.ontology, split_of(d, split)).to_json());
           },
           py::arg("dataset"), py::arg("split") = "test");

  m.def(
      "train",
      [](const Dataset& d, const py::dict& settings, const py::object& on_epoch) {
        const TrainConfig c = make_config(settings);
        EpochCallback cb;
        if (!on_epoch.is_none()) {
          cb = [&on_epoch](const EpochLog& l) { on_epoch(loads(l.to_json())); };
        }
        TrainResult r = train(d, c, cb);
        py::list log;
        for (const auto& l : r.log) log.append(loads(l.to_json()));
        return py::make_tuple(std::make_shared<Model>(std::move(r.model)), log);
      },
      py::arg("dataset"), py::arg("settings") = py::dict(), py::arg("on_epoch") = py::none(),
      "Trains a model; returns (model, epoch log). Settings use config-file keys.");

  m.def("config_text", [](const py::dict& settings) { return config_to_text(make_config(settings)); },
        py::arg("settings") = py::dict());

  py::class_<Dialogue>(m, "Dialogue")
      .def(py::init([](std::shared_ptr<Model> model) {
        return std::make_unique<Dialogue>(std::shared_ptr<const Model>(std::move(model)));
      }))
      .def("step", &Dialogue::step)
      .def("transcript", &Dialogue::transcript)
      .def("reset", &Dialogue::reset);
}
