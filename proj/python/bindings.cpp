#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fusad/cli.hpp"
#include "fusad/config.hpp"
#include "fusad/data.hpp"
#include "fusad/error.hpp"
#include "fusad/fft.hpp"
#include "fusad/metrics.hpp"
#include "fusad/model.hpp"
#include "fusad/spectral.hpp"
#include "fusad/training.hpp"

namespace py = pybind11;
using namespace fusad;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) { return std::vector<double>(a.data(), a.data() + a.size()); }

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), to_vector(a));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Array to_array(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

FusADConfig parse_config(const std::string& text) { return model_config_from_json(nlohmann::json::parse(text)); }

}  // namespace

PYBIND11_MODULE(_fusad, m) {
  m.doc() = "FusAD core bindings";

  // Map the error hierarchy onto Python exceptions.
  static py::exception<Error> base(m, "FusadError");
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<InputError> input_error(m, "InputError", base.ptr());
  static py::exception<NumericalError> numerical_error(m, "NumericalError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const InputError& e) {
      py::set_error(input_error, e.what());
    } catch (const NumericalError& e) {
      py::set_error(numerical_error, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def(
      "rfft",
      [](const Array& x) {
        const auto bins = fusad::rfft(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
        py::array_t<std::complex<double>> out(static_cast<py::ssize_t>(bins.size()));
        std::copy(bins.begin(), bins.end(), out.mutable_data());
        return out;
      },
      py::arg("x"), "Non-negative frequency bins of a real signal.");
  m.def(
      "irfft",
      [](const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& bins, std::size_t n) {
        const std::vector<std::complex<double>> v(bins.data(), bins.data() + bins.size());
        return to_array(fusad::irfft(v, n));
      },
      py::arg("bins"), py::arg("n"));
  m.def("hanning", [](std::size_t n) { return to_array(hanning(n)); }, py::arg("length"));

  m.def(
      "denoise",
      [](const Array& x, double theta1, double theta2, bool use_hanning) {
        const auto r = denoise_signal(to_vector(x), theta1, theta2, use_hanning);
        std::vector<bool> kept = r.kept;
        return py::make_tuple(to_array(r.signal), to_array(r.power), kept);
      },
      py::arg("x"), py::arg("theta1"), py::arg("theta2"), py::arg("use_hanning") = false,
      "Hard band mask on log power; returns (signal, power, kept).");
  m.def(
      "fit_band_thresholds",
      [](const Array& x, bool use_hanning) { return fit_band_thresholds(to_vector(x), use_hanning); }, py::arg("x"),
      py::arg("use_hanning") = false);

  m.def("default_scales", &default_scales, py::arg("length"), py::arg("count") = 16, py::arg("morlet_center") = 6.0);
  m.def(
      "cwt",
      [](const Array& x, std::vector<double> scales, double center) {
        const std::size_t n = static_cast<std::size_t>(x.size());
        if (scales.empty()) scales = default_scales(n, 16, center);
        const MorletBank bank(scales, center, n);
        const Scalogram w = bank.cwt(Tensor({n}, to_vector(x)));
        return py::make_tuple(to_array(w.coefficients.real), to_array(w.coefficients.imag), scales);
      },
      py::arg("x"), py::arg("scales") = std::vector<double>{}, py::arg("morlet_center") = 6.0,
      "Morlet scalogram; returns (real [S, Z], imag [S, Z], scales).");
  m.def(
      "cwt_roundtrip",
      [](const Array& x, std::vector<double> scales, double center) {
        const std::size_t n = static_cast<std::size_t>(x.size());
        if (scales.empty()) scales = default_scales(n, 16, center);
        const MorletBank bank(scales, center, n);
        return to_array(bank.icwt(bank.cwt(Tensor({n}, to_vector(x)))));
      },
      py::arg("x"), py::arg("scales") = std::vector<double>{}, py::arg("morlet_center") = 6.0);

  m.def(
      "masked_mse",
      [](const Array& x, const Array& x_hat, const Array& lambda) {
        return masked_mse(to_tensor(x), to_tensor(x_hat), to_vector(lambda)).item();
      },
      py::arg("x"), py::arg("x_hat"), py::arg("mask"));
  m.def(
      "label_smooth_ce",
      [](const Array& logits, const std::vector<int>& labels, double eps) {
        return label_smooth_ce(to_tensor(logits), labels, eps).item();
      },
      py::arg("logits"), py::arg("labels"), py::arg("eps") = 0.1);

  m.def("accuracy", &accuracy, py::arg("predictions"), py::arg("labels"));
  m.def(
      "mse_mae",
      [](const Array& p, const Array& t) {
        const auto e = mse_mae(to_vector(p), to_vector(t));
        return py::make_tuple(e.mse, e.mae);
      },
      py::arg("prediction"), py::arg("truth"));
  m.def(
      "prf1",
      [](const std::vector<int>& pred, const std::vector<int>& truth, bool point_adjust) {
        const auto r = prf1(pred, truth, point_adjust);
        return py::make_tuple(r.precision, r.recall, r.f1);
      },
      py::arg("predicted"), py::arg("truth"), py::arg("point_adjust") = true);

  m.def(
      "synth_classification",
      [](std::size_t n_per_class, std::size_t length, std::vector<double> freqs, double noise, std::uint64_t seed,
         std::size_t channels) {
        SynthClassificationSpec spec;
        spec.n_per_class = n_per_class;
        spec.length = length;
        spec.freqs = std::move(freqs);
        spec.noise = noise;
        spec.seed = seed;
        spec.n_channels = channels;
        const SeriesDataset ds = synth_classification(spec);
        Array x({static_cast<py::ssize_t>(ds.size()), static_cast<py::ssize_t>(channels),
                 static_cast<py::ssize_t>(length)});
        std::copy(ds.inputs.begin(), ds.inputs.end(), x.mutable_data());
        return py::make_tuple(x, ds.labels);
      },
      py::arg("n_per_class"), py::arg("length"), py::arg("freqs"), py::arg("noise"), py::arg("seed") = 0,
      py::arg("channels") = 1, "Returns (X [S, N, T], labels).");

  m.def(
      "parameter_accounting",
      [](const std::string& config_json) {
        const auto acc = parameter_accounting(parse_config(config_json));
        return acc.components;
      },
      py::arg("config_json"));

  py::class_<FusADModel>(m, "Model")
      .def(py::init([](const std::string& config_json) { return FusADModel(parse_config(config_json)); }),
           py::arg("config_json"))
      .def_static(
          "load", [](const std::string& path) { return load_model(path); }, py::arg("path"))
      .def(
          "save", [](const FusADModel& self, const std::string& path) { save_model(self, path); }, py::arg("path"))
      .def(
          "forward",
          [](FusADModel& self, const Array& x, const std::string& task) {
            NoGradGuard no_grad;
            return to_array(self.forward(to_tensor(x), task_from_string(task)));
          },
          py::arg("x"), py::arg("task"))
      .def(
          "anomaly_scores",
          [](FusADModel& self, const Array& x) { return to_array(anomaly_scores(self, to_tensor(x))); }, py::arg("x"))
      .def_property_readonly("parameter_count", &FusADModel::parameter_count)
      .def_property_readonly("config_json", [](const FusADModel& self) { return to_json(self.config()).dump(); })
      .def("parameter_names", [](const FusADModel& self) {
        std::vector<std::string> names;
        for (const auto& p : self.parameters()) names.push_back(p.name);
        return names;
      })
      .def(
          "parameter",
          [](const FusADModel& self, const std::string& name) {
            const auto p = self.find(name);
            if (!p) throw py::key_error(name);
            return to_array(p->value);
          },
          py::arg("name"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        std::vector<std::string> full{"fusad"};
        full.insert(full.end(), args.begin(), args.end());
        const int code = run_cli(full, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line interface in-process; returns (exit_code, stdout, stderr).");
}
