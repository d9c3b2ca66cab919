#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sharpline/datasets.hpp"
#include "sharpline/errors.hpp"
#include "sharpline/harness/commands.hpp"
#include "sharpline/harness/config.hpp"
#include "sharpline/model.hpp"
#include "sharpline/probes.hpp"
#include "sharpline/quadratic.hpp"

namespace py = pybind11;
using namespace sharpline;
namespace sh = sharpline::harness;

namespace {

ParamVector pv(const std::vector<double>& v) { return ParamVector(v); }

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

ModelSpec make_spec(const std::vector<std::size_t>& widths, const std::string& activation, const std::string& head,
                    std::uint64_t init_seed, double init_scale) {
  ModelSpec s;
  s.widths = widths;
  s.activation = parse_activation(activation);
  s.head = parse_output_head(head);
  s.init_seed = init_seed;
  s.init_scale = init_scale;
  s.validate();
  return s;
}

Batch make_batch(const ModelSpec& spec, const py::array_t<double, py::array::c_style | py::array::forcecast>& inputs,
                 const py::object& targets) {
  Batch b;
  b.inputs = to_matrix(inputs);
  if (spec.head == OutputHead::cross_entropy) {
    b.labels = targets.cast<std::vector<int>>();
  } else {
    b.targets = to_matrix(targets.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>());
  }
  validate_batch(b, spec);
  return b;
}

py::dict estimate_dict(const probes::SharpnessEstimate& e) {
  py::dict d;
  d["eta_c"] = e.eta_c;
  d["lambda_c"] = e.lambda_c;
  d["eta_lower"] = e.bracket.eta_lower;
  d["eta_upper"] = e.bracket.eta_upper;
  d["degenerate"] = e.degenerate();
  d["forward_passes"] = e.forward_passes;
  d["warm_started"] = e.warm_started;
  d["loss_ids"] = e.loss_ids;
  return d;
}

probes::ProbeSettings settings(double eta0, double epsilon, std::size_t max_iters) {
  probes::ProbeSettings s;
  s.eta0 = eta0;
  s.epsilon = epsilon;
  s.max_exponential_iters = max_iters;
  s.validate();
  return s;
}

sh::ConfigReader reader(const std::string& text) { return sh::ConfigReader::from_string(text, "<python>"); }

}  // namespace

PYBIND11_MODULE(_sharpline, m) {
  m.doc() = "Critical-sharpness probes, stability thresholds and experiment commands.";

  auto base = py::register_exception<Error>(m, "SharplineError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ZeroDirectionError>(m, "ZeroDirectionError", base.ptr());
  py::register_exception<NonFiniteError>(m, "NonFiniteError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<NoBoundaryError>(m, "NoBoundaryError", base.ptr());
  py::register_exception<DegenerateDenominatorError>(m, "DegenerateDenominatorError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());

  // quadratic lab
  m.def("gd_wd_threshold", &quadratic::gd_wd_threshold, py::arg("eta"), py::arg("gamma") = 0.0);
  m.def("adamw_threshold", &quadratic::adamw_threshold, py::arg("eta"), py::arg("gamma"), py::arg("beta1"));
  m.def("stability_predicate", &quadratic::stability_predicate, py::arg("p1"), py::arg("p2"));
  m.def(
      "simulate_gd_wd",
      [](double lambda, double eta, double gamma, std::size_t steps) -> py::tuple {
        const auto v = quadratic::simulate_gd_wd(lambda, eta, gamma, steps);
        return py::make_tuple(v.diverged, v.steps_simulated, v.growth_ratio);
      },
      py::arg("lam"), py::arg("eta"), py::arg("gamma") = 0.0, py::arg("steps") = quadratic::kDefaultStepBudget,
      "(diverged, steps_simulated, growth_ratio)");
  m.def(
      "simulate_adamw_frozen",
      [](double lambda_ph, double eta, double gamma, double beta1, std::size_t steps) -> py::tuple {
        const auto v = quadratic::simulate_adamw_frozen(lambda_ph, eta, gamma, beta1, steps);
        return py::make_tuple(v.diverged, v.steps_simulated, v.growth_ratio);
      },
      py::arg("lambda_ph"), py::arg("eta"), py::arg("gamma"), py::arg("beta1"),
      py::arg("steps") = quadratic::kDefaultStepBudget);

  // probes
  m.def(
      "quadratic_critical_sharpness",
      [](const std::vector<double>& eigenvalues, const std::vector<double>& theta,
         std::optional<std::vector<double>> delta, std::optional<std::vector<double>> offset, double eta0,
         double epsilon, std::size_t max_iters) {
        auto q = std::make_shared<quadratic::QuadraticProblem>(
            eigenvalues, offset ? *offset : std::vector<double>(eigenvalues.size(), 0.0));
        const ParamVector th = pv(theta);
        const ParamVector d = delta ? pv(*delta) : gradient(*q, th);
        LossProbe probe = make_probe(q, th, d);
        return estimate_dict(probes::critical_lr(probe, settings(eta0, epsilon, max_iters)));
      },
      py::arg("eigenvalues"), py::arg("theta"), py::arg("delta") = py::none(), py::arg("offset") = py::none(),
      py::arg("eta0") = 1e-2, py::arg("epsilon") = 1.0 / 16.0, py::arg("max_iters") = 40,
      "Critical sharpness of 0.5 sum l_i t_i^2 + offset . t along delta (default: the gradient).");
  m.def(
      "directional_sharpness",
      [](const std::vector<double>& g, const std::vector<double>& d, const std::vector<double>& hd) {
        return probes::directional_sharpness(pv(g), pv(d), pv(hd));
      },
      py::arg("grad"), py::arg("delta"), py::arg("h_delta"));
  m.def(
      "power_iteration",
      [](const std::function<std::vector<double>(const std::vector<double>&)>& op, std::size_t dim, double tol,
         std::size_t max_iter, std::uint64_t seed) {
        const auto e = probes::power_iteration([&](const ParamVector& v) { return pv(op(v.values())); }, dim,
                                               probes::PowerSettings{tol, max_iter, seed});
        return py::make_tuple(e.lambda, e.vector.values(), e.iterations, e.converged);
      },
      py::arg("op"), py::arg("dim"), py::arg("tol") = 1e-4, py::arg("max_iter") = 200, py::arg("seed") = 0,
      "(lambda, vector, iterations, converged)");

  // models and data
  py::class_<ModelSpec>(m, "Mlp")
      .def(py::init(&make_spec), py::arg("widths"), py::arg("activation") = "gelu",
           py::arg("head") = "cross-entropy", py::arg("init_seed") = 0, py::arg("init_scale") = 1.0)
      .def_property_readonly("widths", [](const ModelSpec& s) { return s.widths; })
      .def_property_readonly("param_count", &ModelSpec::param_count)
      .def("init_params", [](const ModelSpec& s) { return s.init_params().values(); })
      .def(
          "loss",
          [](const ModelSpec& s, const std::vector<double>& params, const py::array_t<double>& x, const py::object& y) {
            return loss(pv(params), s, make_batch(s, x, y));
          },
          py::arg("params"), py::arg("inputs"), py::arg("targets"))
      .def(
          "gradient",
          [](const ModelSpec& s, const std::vector<double>& params, const py::array_t<double>& x, const py::object& y) {
            return gradient(pv(params), s, make_batch(s, x, y)).values();
          },
          py::arg("params"), py::arg("inputs"), py::arg("targets"))
      .def(
          "critical_sharpness",
          [](const ModelSpec& s, const std::vector<double>& params, const py::array_t<double>& x, const py::object& y,
             std::optional<std::vector<double>> delta, double eta0, double epsilon) {
            const Batch b = make_batch(s, x, y);
            const ParamVector th = pv(params);
            const ParamVector d = delta ? pv(*delta) : gradient(th, s, b);
            LossProbe probe = make_probe(th, s, b, d);
            return estimate_dict(probes::critical_lr(probe, settings(eta0, epsilon, 40)));
          },
          py::arg("params"), py::arg("inputs"), py::arg("targets"), py::arg("delta") = py::none(),
          py::arg("eta0") = 1e-2, py::arg("epsilon") = 1.0 / 16.0);

  m.def(
      "generate_task",
      [](const std::string& kind, std::size_t dim, std::size_t classes, double separation, double noise,
         std::uint64_t structure_seed, std::uint64_t sample_seed, double angle, std::size_t start,
         std::size_t count) -> py::tuple {
        data::TaskSpec t;
        t.kind = data::parse_task_kind(kind);
        t.dim = dim;
        t.classes = classes;
        t.separation = separation;
        t.noise = noise;
        t.structure_seed = structure_seed;
        t.sample_seed = sample_seed;
        t.rotation_seed = structure_seed;
        t.angle = angle;
        const Batch b = data::generate(t, start, count);
        if (t.is_classification()) return py::make_tuple(to_array(b.inputs), b.labels);
        return py::make_tuple(to_array(b.inputs), to_array(b.targets));
      },
      py::arg("kind") = "gaussian-mixture-classify", py::arg("dim") = 8, py::arg("classes") = 4,
      py::arg("separation") = 1.0, py::arg("noise") = 1.0, py::arg("structure_seed") = 0, py::arg("sample_seed") = 0,
      py::arg("angle") = 0.0, py::arg("start") = 0, py::arg("count") = 64, "(inputs, labels or targets)");

  // commands; configs are `key = value` text
  m.def(
      "train",
      [](const std::string& config, const std::string& out) {
        const sh::TrainConfig c = sh::load_train(reader(config), out);
        const sh::TrainResult r = sh::run_train(c, !out.empty());
        py::list probes;
        for (const auto& p : r.probes) {
          py::dict d;
          d["step"] = p.step;
          d["eos_line"] = p.eos_line;
          d["threshold"] = p.threshold;
          d["critical"] = p.critical ? py::object(estimate_dict(*p.critical)) : py::none();
          d["relative"] = p.relative ? py::object(estimate_dict(*p.relative)) : py::none();
          d["lambda_dir"] = p.lambda_dir ? py::object(py::float_(*p.lambda_dir)) : py::none();
          d["lambda_h"] = p.hessian ? py::object(py::float_(p.hessian->lambda)) : py::none();
          d["lambda_ph"] = p.preconditioned ? py::object(py::float_(p.preconditioned->lambda)) : py::none();
          probes.append(d);
        }
        std::vector<double> losses;
        for (const auto& row : r.rows) losses.push_back(row.loss);
        py::dict res;
        res["exit_code"] = r.exit_code;
        res["message"] = r.message;
        res["steps_completed"] = r.steps_completed;
        res["loss"] = losses;
        res["probes"] = probes;
        res["params"] = r.params.values();
        return res;
      },
      py::arg("config"), py::arg("out") = "", "Train and probe; writes logs only when `out` is given.");
  m.def(
      "quad_validate",
      [](const std::string& config, const std::string& out) {
        const sh::QuadValidateResult r = sh::run_quad_validate(sh::load_quad_grid(reader(config), out), !out.empty());
        py::list cells;
        for (const auto& c : r.cells) {
          py::dict d;
          d["optimizer"] = c.optimizer;
          d["lambda"] = c.lambda;
          d["eta"] = c.eta;
          d["gamma"] = c.gamma;
          d["beta1"] = c.beta1;
          d["predicted"] = c.predicted;
          d["empirical"] = c.empirical;
          d["rel_error"] = c.rel_error;
          d["status"] = c.status;
          cells.append(d);
        }
        return py::make_tuple(r.exit_code, cells);
      },
      py::arg("config"), py::arg("out") = "", "(exit_code, cells)");
  m.def(
      "mix_sweep",
      [](const std::string& config, const std::string& out) {
        const sh::MixSweepResult r = sh::run_mix_sweep(sh::load_mix_sweep(reader(config), out), !out.empty());
        py::list rows;
        for (const auto& row : r.ratios) {
          py::dict d;
          d["ratio"] = row.ratio;
          d["lambda_a_mean"] = row.a_mean;
          d["lambda_a_sd"] = row.a_sd;
          d["lambda_b_mean"] = row.b_mean;
          d["lambda_b_sd"] = row.b_sd;
          d["degenerate_a"] = row.a_degenerate;
          d["degenerate_b"] = row.b_degenerate;
          rows.append(d);
        }
        py::dict res;
        res["pretrain_steps"] = r.pretrain_steps;
        res["pretrain_loss"] = r.pretrain_loss;
        res["lambda_plain_a"] = r.plain_a_mean;
        res["ratios"] = rows;
        return res;
      },
      py::arg("config"), py::arg("out") = "");
  m.def(
      "plot", [](const std::string& config) { return sh::run_plot(sh::load_plot(reader(config))); },
      py::arg("config"), "Render a log to SVG; returns the SVG text.");
}
