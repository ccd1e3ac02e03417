// Copyright 2026 The wdwada Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Python module wdwada._core. Structured values cross the boundary as JSON
// text; the package __init__ converts them to dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "wdwada/checkpoint.hpp"
#include "wdwada/data.hpp"
#include "wdwada/errors.hpp"
#include "wdwada/experiment.hpp"
#include "wdwada/losses.hpp"
#include "wdwada/metrics.hpp"
#include "wdwada/networks.hpp"

namespace py = pybind11;
using namespace wdwada;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const Array& a) { return std::vector<double>(a.data(), a.data() + a.size()); }

py::tuple table_arrays(const RawTable& t) {
  Array x(std::vector<py::ssize_t>{py::ssize_t(t.rows()), py::ssize_t(t.cols())});
  std::copy(t.values.begin(), t.values.end(), x.mutable_data());
  Array y(std::vector<py::ssize_t>{py::ssize_t(t.rows())});
  std::copy(t.labels.begin(), t.labels.end(), y.mutable_data());
  return py::make_tuple(x, y);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Wasserstein adversarial domain adaptation toolkit";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<CapabilityError>(m, "CapabilityError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto data_error = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", data_error.ptr());
  py::register_exception<MetricError>(m, "MetricError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.def(
      "generate_shifted_domains",
      [](const std::string& spec_json) {
        const ShiftSpec spec = shift_spec_from_json(nlohmann::json::parse(spec_json));
        const SyntheticDomains d = generate_shifted_domains(spec);
        const py::tuple s = table_arrays(d.source), t = table_arrays(d.target);
        return py::make_tuple(s[0], s[1], t[0], t[1]);
      },
      py::arg("spec_json"), "Returns (source_x, source_y, target_x, target_y).");
  m.def("default_shift_spec", []() { return shift_spec_to_json(ShiftSpec{}).dump(); });

  m.def("cross_entropy", [](const Array& p, const Array& y) { return cross_entropy(to_tensor(p), to_tensor(y)); });
  m.def(
      "weighted_focal_loss",
      [](const Array& p, const Array& y, double gamma, double alpha_pos) {
        return weighted_focal_loss(to_tensor(p), to_tensor(y), gamma, alpha_pos);
      },
      py::arg("probs"), py::arg("labels"), py::arg("gamma") = 2.0, py::arg("alpha_pos") = 1.0);
  m.def("wasserstein_objective",
        [](const Array& t, const Array& s) { return wasserstein_objective(to_tensor(t), to_tensor(s)); });

  m.def("auc", [](const Array& s, const Array& y) { return auc(to_vector(s), to_vector(y)); });
  m.def(
      "evaluate",
      [](const Array& s, const Array& y, double threshold) {
        return to_json(evaluate(to_vector(s), to_vector(y), threshold), true).dump();
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
  m.def(
      "robustness_summary",
      [](const std::vector<double>& values, double confidence) {
        return to_json(robustness_summary(values, confidence)).dump();
      },
      py::arg("values"), py::arg("confidence") = 0.95);

  m.def("shape_chain", [](std::size_t input_len) {
    ModelConfig cfg;
    cfg.input_len = input_len;
    const ShapeChain c = compute_shape_chain(cfg);
    return std::vector<std::size_t>{c.input, c.conv1, c.pool1, c.conv2, c.pool2};
  });

  py::class_<ModelBundle>(m, "Model")
      .def(py::init([](std::uint64_t seed, std::size_t input_len) {
             ModelConfig cfg;
             cfg.input_len = input_len;
             return init_model(seed, cfg);
           }),
           py::arg("seed") = 0, py::arg("input_len") = 38)
      .def_static("load", [](const std::string& stem) { return load_checkpoint(stem); })
      .def("save", [](const ModelBundle& b, const std::string& stem) { save_checkpoint(b, stem); })
      .def("features", [](const ModelBundle& b, const Array& x) { return to_array(extract_features(b, to_tensor(x))); })
      .def("predict_proba", [](const ModelBundle& b, const Array& x) { return to_array(predict_proba(b, to_tensor(x))); })
      .def("critic", [](const ModelBundle& b, const Array& z) { return to_array(criticize(b, to_tensor(z))); })
      .def_property_readonly("config", [](const ModelBundle& b) { return model_config_to_json(b.config).dump(); })
      .def_property_readonly("parameter_count", [](const ModelBundle& b) {
        return b.extractor.parameter_count() + b.classifier.parameter_count() + b.critic.parameter_count();
      });

  m.def(
      "run_experiment",
      [](const std::string& spec_json) {
        const ExperimentSpec spec = experiment_spec_from_json(nlohmann::json::parse(spec_json));
        ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(spec);
        }
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& r : result.runs) {
          runs.push_back({{"index", r.index}, {"seed", r.seed}, {"metrics", to_json(r.report)}});
        }
        nlohmann::json out = {{"runs", runs}};
        out["auc_ci"] = result.auc_summary ? to_json(*result.auc_summary) : nlohmann::json(nullptr);
        return out.dump();
      },
      py::arg("spec_json"));
  m.def("report", [](const std::vector<std::string>& dirs) {
    std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
    const Report r = collect_report(paths);
    return py::make_tuple(render_report(r), to_json(r).dump());
  });
}
