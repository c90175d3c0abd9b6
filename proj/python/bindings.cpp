#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nspe/analysis.hpp"
#include "nspe/harness.hpp"

namespace py = pybind11;
using namespace nspe;

PYBIND11_MODULE(_nspe, m) {
  m.doc() = "diffusion-network node-specific parameter estimation";

  py::register_exception<config_error>(m, "ConfigError");
  py::register_exception<io_error>(m, "IoError");
  py::register_exception<calibration_error>(m, "CalibrationError");

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readwrite("iterations", &ExperimentConfig::iterations)
      .def_readwrite("runs", &ExperimentConfig::runs)
      .def_readwrite("master_seed", &ExperimentConfig::master_seed)
      .def_readwrite("freeze_truth", &ExperimentConfig::freeze_truth)
      .def_readwrite("trace_points", &ExperimentConfig::trace_points)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def_property(
          "variants",
          [](const ExperimentConfig& c) {
            std::vector<std::string> out;
            for (Variant v : c.variants) out.push_back(variant_name(v));
            return out;
          },
          [](ExperimentConfig& c, const std::vector<std::string>& names) {
            std::vector<Variant> vs;
            for (const std::string& n : names)
              vs.push_back(variant_from_name(n));
            if (vs.empty()) throw config_error("variants must not be empty");
            c.variants = std::move(vs);
          })
      .def_property_readonly("num_nodes",
                             [](const ExperimentConfig& c) {
                               return c.nodes.size();
                             })
      .def_property_readonly("num_tasks", [](const ExperimentConfig& c) {
        return c.tasks.size();
      });

  py::class_<BiasPrediction>(m, "BiasPrediction")
      .def_readonly("bias", &BiasPrediction::bias)
      .def_readonly("spectral_radius", &BiasPrediction::spectral_radius)
      .def_readonly("converged", &BiasPrediction::converged);

  py::class_<MsdTrace>(m, "MsdTrace")
      .def_readonly("iterations", &MsdTrace::iterations)
      .def_readonly("linear", &MsdTrace::linear)
      .def_readonly("db", &MsdTrace::db);

  py::class_<VariantResult>(m, "VariantResult")
      .def_property_readonly(
          "name",
          [](const VariantResult& v) { return variant_name(v.config.kind); })
      .def_readonly("mean_trace", &VariantResult::mean_trace)
      .def_readonly("steady_msd_db", &VariantResult::steady_msd_db)
      .def_readonly("steady_msd_linear", &VariantResult::steady_msd_linear)
      .def_readonly("mean_error", &VariantResult::mean_error)
      .def_readonly("completed_runs", &VariantResult::completed_runs)
      .def_readonly("diverged_runs", &VariantResult::diverged_runs)
      .def_readonly("precision", &VariantResult::precision)
      .def_readonly("recall", &VariantResult::recall)
      .def_readonly("false_alarm_rate", &VariantResult::false_alarm_rate)
      .def_readonly("misdetection_rate", &VariantResult::misdetection_rate)
      .def_readonly("bias_available", &VariantResult::bias_available)
      .def_readonly("bias", &VariantResult::bias);

  py::class_<RunRecord>(m, "RunRecord")
      .def_readonly("run", &RunRecord::run)
      .def_readonly("sigma_u", &RunRecord::sigma_u)
      .def_readonly("tau", &RunRecord::tau)
      .def_readonly("stream_hash", &RunRecord::stream_hash)
      .def_readonly("diverged", &RunRecord::diverged)
      .def_readonly("wall_seconds", &RunRecord::wall_seconds);

  py::class_<AggregatedResults>(m, "AggregatedResults")
      .def_readonly("variants", &AggregatedResults::variants)
      .def_readonly("runs", &AggregatedResults::runs)
      .def_readonly("wall_seconds", &AggregatedResults::wall_seconds);

  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", &parse_config, py::arg("json_text"));
  m.def("run_experiment", &run_experiment, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("emit_outputs", &emit_outputs, py::arg("results"), py::arg("config"));
  m.def("summary_json", &summary_json, py::arg("results"), py::arg("config"));
}
