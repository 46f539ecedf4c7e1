#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "reachmap/chain_io.hpp"
#include "reachmap/cli.hpp"
#include "reachmap/error.hpp"
#include "reachmap/eval.hpp"
#include "reachmap/models.hpp"
#include "reachmap/planner.hpp"
#include "reachmap/qp.hpp"
#include "reachmap/sampling.hpp"

namespace py = pybind11;
using namespace reachmap;

namespace {

SampleSet make_set(const std::string& space, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  SampleSet s;
  s.space = TaskSpace::from_name(space);
  if (X.rows() != y.size() || X.cols() != s.space.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "inputs must be len(labels) x " + std::to_string(s.space.input_dim()));
  }
  s.inputs = X;
  s.labels = y;
  return s;
}

py::tuple set_tuple(const SampleSet& s) { return py::make_tuple(s.space.name(), s.inputs, s.labels); }

}  // namespace

PYBIND11_MODULE(_reachmap, m) {
  m.doc() = "Learned reachability maps";

  static py::exception<Error> error(m, "ReachmapError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), (std::string(error_code_name(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def(
      "encode", [](const std::string& space, const Eigen::VectorXd& coords) {
        return encode(Pose(TaskSpace::from_name(space), coords));
      },
      py::arg("space"), py::arg("coords"), "Model input vector of a pose.");

  py::class_<ReachabilityMap, std::shared_ptr<ReachabilityMap>>(m, "Model")
      .def_property_readonly("space", [](const ReachabilityMap& r) { return r.space().name(); })
      .def_property_readonly("offset", &ReachabilityMap::offset)
      .def_property_readonly("kind", [](const ReachabilityMap& r) { return describe_model(r); })
      .def("value", &ReachabilityMap::value, py::arg("x"))
      .def("gradient", &ReachabilityMap::gradient, py::arg("x"))
      .def(
          "values",
          [](const ReachabilityMap& r, const Eigen::MatrixXd& X) {
            Eigen::VectorXd v(X.rows());
            for (Eigen::Index i = 0; i < X.rows(); ++i) v[i] = r.value(X.row(i).transpose());
            return v;
          },
          py::arg("X"))
      .def("save", [](const ReachabilityMap& r, const std::string& path) { save_model(r, path); })
      .def("to_json", [](const ReachabilityMap& r) { return model_to_json(r); });

  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "train_svm",
      [](const std::string& space, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double gamma, double C,
         double offset) -> MapPtr {
        SvmConfig cfg;
        cfg.gamma = gamma;
        cfg.C = C;
        cfg.offset = offset;
        return std::make_shared<SvmModel>(train_svm(make_set(space, X, y), cfg).model);
      },
      py::arg("space"), py::arg("inputs"), py::arg("labels"), py::arg("gamma") = 30.0, py::arg("C") = 10.0,
      py::arg("offset") = 0.1);
  m.def(
      "train_ocsvm",
      [](const std::string& space, const Eigen::MatrixXd& X, double gamma, double nu, double offset) -> MapPtr {
        SvmConfig cfg;
        cfg.gamma = gamma;
        cfg.nu = nu;
        cfg.offset = offset;
        return std::make_shared<SvmModel>(
            train_ocsvm(make_set(space, X, Eigen::VectorXd::Ones(X.rows())), cfg).model);
      },
      py::arg("space"), py::arg("inputs"), py::arg("gamma") = 30.0, py::arg("nu") = 0.05, py::arg("offset") = 0.1);
  m.def(
      "train_mlp",
      [](const std::string& space, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<int> hidden,
         int epochs, std::uint64_t seed) -> MapPtr {
        MlpConfig cfg;
        cfg.hidden = std::move(hidden);
        cfg.epochs = epochs;
        cfg.seed = seed;
        return std::make_shared<MlpModel>(train_mlp(make_set(space, X, y), cfg).model);
      },
      py::arg("space"), py::arg("inputs"), py::arg("labels"), py::arg("hidden") = std::vector<int>{64, 32},
      py::arg("epochs") = 200, py::arg("seed") = 0);

  m.def(
      "sample",
      [](const std::string& robot_path, const std::string& method, int count, std::uint64_t seed) {
        const Robot robot = load_robot(robot_path);
        if (method == "footstep") {
          return set_tuple(sample_footsteps(std::get<BipedModel>(robot), default_footstep_bounds(), count, seed,
                                            IkOptions{}));
        }
        const SerialChain& chain = std::get<SerialChain>(robot);
        if (method == "fk") return set_tuple(sample_fk(chain, count, seed));
        if (method == "ik") return set_tuple(sample_ik(chain, default_ik_bounds(chain), count, seed, IkOptions{}));
        throw Error(ErrorCode::kInvalidArgument, "method must be fk, ik or footstep");
      },
      py::arg("robot"), py::arg("method"), py::arg("count"), py::arg("seed") = 0,
      "Returns (space, inputs, labels).");
  m.def(
      "oracle_grid",
      [](const std::string& chain_path, int per_axis) {
        const SerialChain chain = load_chain(chain_path);
        return set_tuple(oracle_grid_set(chain, default_ik_bounds(chain), per_axis, 400));
      },
      py::arg("chain"), py::arg("per_axis") = 100);
  m.def(
      "read_samples", [](const std::string& path) { return set_tuple(read_samples_csv(path)); }, py::arg("path"));

  m.def(
      "compute_iou",
      [](const ReachabilityMap& model, const std::string& space, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
         std::optional<double> offset) {
        EvalOptions opts;
        opts.timing = false;
        const EvalReport r = compute_iou(model, make_set(space, X, y), offset, opts);
        py::dict d;
        d["iou"] = r.iou;
        d["tp"] = r.tp;
        d["fp"] = r.fp;
        d["fn"] = r.fn;
        d["tn"] = r.tn;
        d["offset"] = r.offset;
        return d;
      },
      py::arg("model"), py::arg("space"), py::arg("inputs"), py::arg("labels"), py::arg("offset") = py::none());

  m.def(
      "solve_qp",
      [](const Eigen::MatrixXd& Q, const Eigen::VectorXd& c, std::optional<Eigen::MatrixXd> A,
         std::optional<Eigen::VectorXd> b, std::optional<Eigen::VectorXd> lower, std::optional<Eigen::VectorXd> upper) {
        QpProblem p = QpProblem::unconstrained(Q, c);
        if (A.has_value() != b.has_value()) throw Error(ErrorCode::kInvalidArgument, "give both A and b");
        if (A) {
          p.A = *A;
          p.b = *b;
        }
        if (lower) p.lower = *lower;
        if (upper) p.upper = *upper;
        const QpSolution s = solve_qp(p);
        py::dict d;
        d["z"] = s.z;
        d["status"] = qp_status_name(s.status);
        d["objective"] = p.objective(s.z);
        d["kkt_residual"] = s.kkt_residual;
        d["row_multipliers"] = s.row_multipliers;
        return d;
      },
      py::arg("Q"), py::arg("c"), py::arg("A") = py::none(), py::arg("b") = py::none(), py::arg("lower") = py::none(),
      py::arg("upper") = py::none(), "minimize 0.5 z'Qz + c'z s.t. A z >= b, lower <= z <= upper.");

  m.def(
      "plan",
      [](const std::string& problem_path) {
        const PlanFile f = load_plan_file(problem_path);
        const PlanResult r = sqp_solve(f.problem, f.config);
        py::dict d;
        d["kind"] = f.kind;
        d["converged"] = r.converged;
        d["iterations"] = r.iterations;
        d["objective"] = r.objective;
        d["violation"] = r.violation;
        std::vector<Eigen::VectorXd> poses;
        for (const Pose& p : r.poses) poses.push_back(p.coords());
        d["poses"] = poses;
        d["params"] = r.params;
        d["constraint_values"] = r.constraint_values;
        d["constraint_labels"] = r.constraint_labels;
        d["residuals"] = r.residuals;
        return d;
      },
      py::arg("problem"), "Solve a plan problem file.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a reachmap command in-process; returns (exit code, stdout, stderr).");
}
