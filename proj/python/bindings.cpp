#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sgdnoise/acceptance.hpp"
#include "sgdnoise/averaging.hpp"
#include "sgdnoise/config.hpp"
#include "sgdnoise/equivalence.hpp"
#include "sgdnoise/model.hpp"
#include "sgdnoise/plateau.hpp"
#include "sgdnoise/rng.hpp"
#include "sgdnoise/scenario.hpp"
#include "sgdnoise/schedule.hpp"
#include "sgdnoise/stationary.hpp"
#include "sgdnoise/trajectory.hpp"

namespace py = pybind11;
using namespace sgdnoise;

namespace {

Ensemble ensemble_from_args(Eigen::Index d, const MatrixXd& omega, double c_norm, const std::string& kind,
                            std::optional<Eigen::Index> m, std::optional<MatrixXd> noise_cov,
                            std::optional<std::uint64_t> seed) {
  EnsembleSpec spec;
  spec.d = d;
  spec.m = m;
  spec.omega = omega;
  spec.c_norm = c_norm;
  spec.kind = sampler_kind_from_string(kind);
  spec.noise_cov = std::move(noise_cov);
  spec.seed = seed;
  return make_ensemble(spec);
}

std::vector<GradientSnapshot> rows_as_gradients(const MatrixXd& grads, std::uint64_t t1) {
  std::vector<GradientSnapshot> out;
  for (Eigen::Index i = 0; i < grads.rows(); ++i) {
    const auto s = t1 + std::uint64_t(i);
    out.push_back({s, s, grads.row(i).transpose()});
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SGD batch-noise and weight-averaging simulations on quadratic models";

  m.def("derive_seed", &derive_seed, py::arg("master_seed"), py::arg("role"), py::arg("index"));

  py::class_<Ensemble>(m, "Ensemble")
      .def(py::init(&ensemble_from_args), py::arg("d"), py::arg("omega"), py::arg("c_norm") = 1.0,
           py::arg("kind") = "gaussian_factor", py::arg("m") = py::none(), py::arg("noise_cov") = py::none(),
           py::arg("seed") = py::none())
      .def_property_readonly("dim", &Ensemble::dim)
      .def_property_readonly("sample_rows", &Ensemble::sample_rows)
      .def_property_readonly("kind", [](const Ensemble& e) { return to_string(e.kind()); })
      .def_property_readonly("c_norm", &Ensemble::c_norm)
      .def_property_readonly("omega", &Ensemble::omega)
      .def_property_readonly("noise_cov", &Ensemble::noise_cov)
      .def_property_readonly("lambda_max", &Ensemble::lambda_max)
      .def_property_readonly("lambda_min", &Ensemble::lambda_min)
      .def("global_loss", [](const Ensemble& e, const VectorXd& th) { return global_loss(e, th); })
      .def("global_gradient", [](const Ensemble& e, const VectorXd& th) { return global_gradient(e, th); })
      .def(
          "sample_batch",
          [](const Ensemble& e, std::size_t size, std::uint64_t seed) {
            Stream s = make_stream(seed);
            auto batch = sample_batch(e, s, size);
            std::vector<std::pair<MatrixXd, VectorXd>> out;
            for (auto& q : batch.samples) out.emplace_back(q.A, q.c);
            return out;
          },
          py::arg("size"), py::arg("seed"), "List of (A, c) pairs drawn from a stream seeded with `seed`.");

  py::class_<Schedule>(m, "Schedule")
      .def_static("constant", &Schedule::constant, py::arg("lr"))
      .def_static("linear_decay", &Schedule::linear_decay, py::arg("lr0"), py::arg("horizon"))
      .def_static("cosine", &Schedule::cosine, py::arg("lr0"), py::arg("horizon"))
      .def_static("table", &Schedule::table, py::arg("points"))
      .def("__call__", &Schedule::eval)
      .def("eval", &Schedule::eval)
      .def("contains", &Schedule::contains)
      .def("__repr__", &Schedule::describe);

  py::class_<TrajectoryRecord>(m, "TrajectoryRecord")
      .def_readonly("start_step", &TrajectoryRecord::start_step)
      .def_readonly("steps", &TrajectoryRecord::steps)
      .def_readonly("thetas", &TrajectoryRecord::thetas)
      .def_readonly("loss_global", &TrajectoryRecord::loss_global)
      .def_readonly("loss_batch", &TrajectoryRecord::loss_batch)
      .def_readonly("norms", &TrajectoryRecord::norms)
      .def_readonly("lrs", &TrajectoryRecord::lrs)
      .def_readonly("diverged", &TrajectoryRecord::diverged)
      .def_readonly("warnings", &TrajectoryRecord::warnings)
      .def_property_readonly("final_theta", &TrajectoryRecord::final_theta)
      .def("theta_at", &TrajectoryRecord::theta_at);

  m.def(
      "run_trajectory",
      [](const Ensemble& e, const VectorXd& theta0, const Schedule& schedule, std::uint64_t steps,
         std::size_t batch_size, std::uint64_t seed, std::uint64_t thin_every, std::optional<double> momentum) {
        RecorderConfig rec;
        rec.thin_every = thin_every;
        RunOptions opts;
        opts.momentum = momentum;
        py::gil_scoped_release release;
        return run_trajectory(e, theta0, schedule, steps, batch_size, seed, rec, opts);
      },
      py::arg("ensemble"), py::arg("theta0"), py::arg("schedule"), py::arg("steps"), py::arg("batch_size") = 1,
      py::arg("seed") = 0, py::arg("thin_every") = 100, py::arg("momentum") = py::none());

  py::class_<Kernel>(m, "Kernel")
      .def_readonly("weights", &Kernel::weights)
      .def_readonly("label", &Kernel::label)
      .def_property_readonly("support", &Kernel::support)
      .def("__repr__", [](const Kernel& k) { return "Kernel(" + k.label + ")"; });
  m.def("identity_kernel", &identity_kernel);
  m.def("two_point_kernel", &two_point_kernel, py::arg("delta"));
  m.def("swa_kernel", &swa_kernel, py::arg("k"));
  m.def("ema_kernel", &ema_kernel, py::arg("decay"), py::arg("truncation"));
  m.def("multi_point_kernel", &multi_point_kernel, py::arg("n"), py::arg("delta"));
  m.def(
      "custom_kernel",
      [](std::vector<double> w, bool allow_negative) {
        return make_kernel(KernelSpec{KernelSpec::Custom{std::move(w), allow_negative}});
      },
      py::arg("weights"), py::arg("allow_negative") = false);
  m.def("kernel_autocorrelation", &kernel_autocorrelation, py::arg("kernel"), py::arg("delta_max"));
  m.def(
      "average_iterates",
      [](const Kernel& k, const std::vector<VectorXd>& history) { return average_iterates(k, history); },
      py::arg("kernel"), py::arg("history"), "history[-1] is the newest iterate.");

  m.def("baseline_covariance", &baseline_covariance, py::arg("alpha"), py::arg("omega"));
  m.def(
      "stationary_covariance",
      [](double alpha, const MatrixXd& omega, const Kernel& k) { return stationary_covariance(alpha, omega, k).F; },
      py::arg("alpha"), py::arg("omega"), py::arg("kernel"));
  m.def("two_point_covariance", &two_point_covariance, py::arg("alpha"), py::arg("omega"), py::arg("delta"));
  m.def("multi_point_covariance", &multi_point_covariance, py::arg("alpha"), py::arg("omega"), py::arg("n"),
        py::arg("delta"));
  m.def("effective_lr", &effective_lr, py::arg("alpha"), py::arg("kappa"), py::arg("delta"));
  m.def("geometric_series_sum", &geometric_series_sum, py::arg("gamma"));
  m.def("predicted_stationary_norm", &predicted_stationary_norm, py::arg("alpha"), py::arg("ensemble"));
  m.def("zero_drift_lr", &zero_drift_lr, py::arg("theta_sq"), py::arg("mean_gamma"), py::arg("mean_gamma_sq"),
        py::arg("mean_xi_sq"));
  m.def(
      "monte_carlo_covariance",
      [](const Ensemble& e, double alpha, const Kernel& k, std::size_t samples, std::uint64_t seed, std::size_t chains,
         std::size_t threads) {
        py::gil_scoped_release release;
        return monte_carlo_covariance(e, alpha, k, samples, seed, chains, threads).second_moment;
      },
      py::arg("ensemble"), py::arg("alpha"), py::arg("kernel"), py::arg("samples"), py::arg("seed") = 0,
      py::arg("chains") = 8, py::arg("threads") = 1);

  m.def(
      "equivalent_schedule",
      [](const Schedule& base, const std::string& method, std::uint64_t t1, std::uint64_t t2, double decay) {
        return equivalent_schedule(base, AveragingSpec{averaging_method_from_string(method), t1, t2, decay});
      },
      py::arg("base"), py::arg("method"), py::arg("t1"), py::arg("t2"), py::arg("ema_decay") = 0.0);
  m.def(
      "frozen_gradient_replay",
      [](const VectorXd& theta1, const MatrixXd& grads, const Schedule& schedule, std::uint64_t t1) {
        const auto g = rows_as_gradients(grads, t1);
        return frozen_gradient_replay(theta1, g, schedule, t1, t1 + std::uint64_t(grads.rows()));
      },
      py::arg("theta1"), py::arg("gradients"), py::arg("schedule"), py::arg("t1"),
      "Row i of `gradients` is the gradient used at step t1 + i.");
  m.def(
      "frozen_gradient_path",
      [](const VectorXd& theta1, const MatrixXd& grads, const Schedule& schedule, std::uint64_t t1) {
        const auto g = rows_as_gradients(grads, t1);
        return frozen_gradient_path(theta1, g, schedule, t1, t1 + std::uint64_t(grads.rows()));
      },
      py::arg("theta1"), py::arg("gradients"), py::arg("schedule"), py::arg("t1"));

  py::class_<PlateauReport>(m, "PlateauReport")
      .def_readonly("found", &PlateauReport::found)
      .def_readonly("plateau_value", &PlateauReport::plateau_value)
      .def_readonly("onset_step", &PlateauReport::onset_step)
      .def_readonly("band_halfwidth", &PlateauReport::band_halfwidth);
  m.def(
      "detect_plateau",
      [](const std::vector<double>& series, std::size_t window, double rel_tol) {
        return detect_plateau(series, window, rel_tol);
      },
      py::arg("series"), py::arg("window"), py::arg("rel_tol"));

  m.def(
      "validate_config",
      [](const std::string& text) {
        const auto cfg = parse_scenario_config(nlohmann::json::parse(text));
        return to_string(cfg.scenario);
      },
      py::arg("text"), "Parses a scenario config; raises ValueError with the field path on error.");
  m.def(
      "run_scenario",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out,
         std::optional<std::uint64_t> seed, std::size_t threads, bool plots) {
        const auto cfg = load_scenario_config(config);
        RunSettings settings{out, seed, threads, plots};
        py::gil_scoped_release release;
        const auto res = run_scenario(cfg, settings);
        std::vector<std::filesystem::path> files;
        for (const auto& f : res.files) files.push_back(res.output_dir / f);
        return std::make_pair(files, res.diverged);
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(), py::arg("threads") = 1,
      py::arg("plots") = false, "Returns (written file paths, diverged).");

  m.def(
      "run_criterion",
      [](int id, std::size_t threads) {
        CriterionResult r;
        {
          py::gil_scoped_release release;
          r = run_criterion(id, AcceptanceOptions{threads});
        }
        py::list checks;
        for (const auto& c : r.checks) checks.append(py::make_tuple(c.name, c.passed, c.detail));
        py::dict d;
        d["id"] = r.id;
        d["title"] = r.title;
        d["passed"] = r.passed();
        d["checks"] = checks;
        return d;
      },
      py::arg("id"), py::arg("threads") = 1);

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
}
