#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "foliate/error.hpp"
#include "foliate/fourier.hpp"
#include "foliate/pipeline.hpp"

namespace py = pybind11;
using namespace foliate;

namespace {

Stage parse_stage(const std::string& name) {
  for (Stage s : all_stages())
    if (stage_name(s) == name) return s;
  throw ValidationError("unknown stage '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_foliate, m) {
  m.doc() = "Reduced-order models of forced systems from invariant foliations";

  // later registrations are tried first, so the base class goes first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  // configuration and pipeline
  py::class_<PipelineConfig>(m, "Config")
      .def(py::init<>())
      .def_static("from_file", &load_config, py::arg("path"))
      .def_static("from_text", [](const std::string& text) {
        std::istringstream is(text);
        return parse_config(is);
      })
      .def("set", &apply_override, py::arg("assignment"),
           "Apply a 'section.key=value' override.")
      .def("validate", &validate_config)
      .def("text", &config_text)
      .def_readwrite("system", &PipelineConfig::system)
      .def_readwrite("dataset", &PipelineConfig::dataset)
      .def_readwrite("params", &PipelineConfig::params)
      .def_readwrite("omega0", &PipelineConfig::omega0)
      .def_readwrite("dt", &PipelineConfig::dt)
      .def_readwrite("n_traj", &PipelineConfig::n_traj)
      .def_readwrite("n_points", &PipelineConfig::n_points)
      .def_readwrite("radius", &PipelineConfig::radius)
      .def_readwrite("noise", &PipelineConfig::noise)
      .def_readwrite("seed", &PipelineConfig::seed)
      .def_readwrite("ell", &PipelineConfig::ell)
      .def_readwrite("modes", &PipelineConfig::modes)
      .def_readwrite("sigma", &PipelineConfig::sigma)
      .def_readwrite("sweeps", &PipelineConfig::sweeps)
      .def_readwrite("tol", &PipelineConfig::tol)
      .def_readwrite("style", &PipelineConfig::style)
      .def_readwrite("samples", &PipelineConfig::samples)
      .def_readwrite("output_dir", &PipelineConfig::output_dir)
      .def("__repr__", &config_text);

  m.def("stages", [] {
    std::vector<std::string> out;
    for (Stage s : all_stages()) out.push_back(stage_name(s));
    return out;
  });
  m.def(
      "run_pipeline",
      [](const PipelineConfig& c, const std::string& last, const std::function<void(std::string)>& log) {
        std::vector<std::pair<std::string, bool>> out;
        std::function<void(const std::string&)> sink;
        if (log) sink = [&](const std::string& s) {
          py::gil_scoped_acquire gil;
          log(s);
        };
        std::vector<StageStatus> status;
        {
          py::gil_scoped_release release;
          status = run_pipeline(c, parse_stage(last), sink);
        }
        for (const auto& s : status) out.emplace_back(stage_name(s.stage), s.cached);
        return out;
      },
      py::arg("config"), py::arg("last") = "backbone", py::arg("log") = nullptr,
      "Run the stages up to `last`; returns (stage, cached) pairs.");

  // collocation
  py::class_<CollocationGrid>(m, "Grid")
      .def(py::init<int>(), py::arg("ell") = 0)
      .def_property_readonly("ell", &CollocationGrid::ell)
      .def_property_readonly("size", &CollocationGrid::size)
      .def("nodes", &CollocationGrid::nodes);
  m.def(
      "gamma", [](double theta, int ell) { return foliate::gamma(theta, ell); }, py::arg("theta"),
      py::arg("ell"));
  m.def(
      "shift_matrix",
      [](const CollocationGrid& g, double omega) { return shift_matrix(g, omega).entries; },
      py::arg("grid"), py::arg("omega"));

  // systems and data
  py::class_<ForcedSystem>(m, "System")
      .def_readonly("name", &ForcedSystem::name)
      .def_readonly("dim", &ForcedSystem::dim)
      .def_readonly("omega0", &ForcedSystem::omega0)
      .def_readonly("params", &ForcedSystem::params)
      .def("rhs", [](const ForcedSystem& s, const Eigen::VectorXd& x, double th) { return s.rhs(x, th); })
      .def("jacobian", [](const ForcedSystem& s, const Eigen::VectorXd& x, double th) {
        if (!s.jacobian) throw ValidationError("system has no Jacobian");
        return s.jacobian(x, th);
      });
  m.def("make_system", &make_system, py::arg("name"),
        py::arg("params") = std::map<std::string, double>{}, py::arg("omega0"));
  m.def(
      "integrate",
      [](const ForcedSystem& s, const Eigen::VectorXd& x0, double theta0, double dt, int steps,
         int substeps) {
        const auto states = integrate(s, x0, theta0, dt, steps, substeps);
        Eigen::MatrixXd out(s.dim, static_cast<Eigen::Index>(states.size()));
        for (std::size_t k = 0; k < states.size(); ++k) out.col(k) = states[k];
        return out;
      },
      py::arg("system"), py::arg("x0"), py::arg("theta0"), py::arg("dt"), py::arg("steps"),
      py::arg("substeps") = 16, "States as columns, the first being x0.");

  py::class_<TrajectoryDataset>(m, "Dataset")
      .def_readonly("dim", &TrajectoryDataset::dim)
      .def_readonly("dt", &TrajectoryDataset::dt)
      .def_readonly("omega", &TrajectoryDataset::omega)
      .def_readonly("x", &TrajectoryDataset::x)
      .def_readonly("y", &TrajectoryDataset::y)
      .def_readonly("theta", &TrajectoryDataset::theta)
      .def_readonly("trajectory", &TrajectoryDataset::trajectory)
      .def("__len__", &TrajectoryDataset::size)
      .def("save", [](const TrajectoryDataset& d, const std::string& path) { save_dataset(path, d); });
  m.def(
      "generate_dataset",
      [](const ForcedSystem& s, int n_traj, int n_points, double dt, double radius, double noise,
         std::uint64_t seed) {
        DatasetOptions o;
        o.n_traj = n_traj;
        o.n_points = n_points;
        o.dt = dt;
        o.radius = radius;
        o.noise_sigma = noise;
        o.seed = seed;
        return generate_dataset(s, o);
      },
      py::arg("system"), py::arg("n_traj") = 600, py::arg("n_points") = 50, py::arg("dt") = 0.8,
      py::arg("radius") = 1.0, py::arg("noise") = 0.0, py::arg("seed") = 1);
  m.def("load_dataset", &load_dataset, py::arg("path"));

  // linear identification and bundles
  py::class_<AffineModel>(m, "AffineModel")
      .def_readonly("grid", &AffineModel::grid)
      .def_readonly("A", &AffineModel::A)
      .def_readonly("b", &AffineModel::b)
      .def("A_at", &AffineModel::A_at)
      .def("b_at", &AffineModel::b_at);
  py::class_<LinearIdResult>(m, "LinearId")
      .def_readonly("model", &LinearIdResult::model)
      .def_property_readonly("torus", [](const LinearIdResult& r) { return r.K.values; })
      .def_readonly("weights", &LinearIdResult::weights)
      .def_readonly("active", &LinearIdResult::active)
      .def_readonly("iterations", &LinearIdResult::iterations)
      .def_readonly("converged", &LinearIdResult::converged);
  m.def(
      "identify_linear",
      [](const TrajectoryDataset& d, int ell, double epsilon, double trim, int max_iter) {
        LinearIdOptions o;
        o.epsilon = epsilon;
        o.trim_fraction = trim;
        o.max_iter = max_iter;
        return iterate_linear_id(d, CollocationGrid(ell), o);
      },
      py::arg("data"), py::arg("ell") = 0, py::arg("epsilon") = 1.0 / 256.0,
      py::arg("trim") = 0.1, py::arg("max_iter") = 30);

  py::class_<BundleDecomposition>(m, "Bundles")
      .def_property_readonly("eigenvalues", [](const BundleDecomposition& d) { return d.spectrum.values; })
      .def_property_readonly("clusters",
                             [](const BundleDecomposition& d) {
                               py::list out;
                               for (std::size_t i = 0; i < d.clusters.size(); ++i) {
                                 const auto& c = d.clusters[i];
                                 py::dict e;
                                 e["lambda"] = c.lambda;
                                 e["lo"] = c.lo;
                                 e["hi"] = c.hi;
                                 e["size"] = d.bundles[i].rows();
                                 out.append(e);
                               }
                               return out;
                             })
      .def("report", &mode_report, py::arg("dt"));
  m.def(
      "decompose_bundles",
      [](const AffineModel& a, double omega) { return decompose_bundles(a.grid, a.A, omega); },
      py::arg("model"), py::arg("omega"));
}
