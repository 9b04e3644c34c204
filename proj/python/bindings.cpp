#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "tsg_acc/output.hpp"
#include "tsg_acc/sim.hpp"

namespace py = pybind11;
using namespace tsg_acc;

namespace {

py::dict metrics_dict(const Metrics& m)
{
  py::dict d;
  d["min_h_acc"] = m.min_h_acc;
  d["min_gap"] = m.min_gap;
  d["min_clearance"] = m.min_clearance;
  d["max_violation_depth"] = m.max_violation_depth;
  d["lateral_rms"] = m.lateral_rms;
  d["speed_rms"] = m.speed_rms;
  d["max_abs_t_sh"] = m.max_abs_t_sh;
  d["steps_shifted"] = m.steps_shifted;
  d["saturations"] = m.saturations;
  d["degraded_steps"] = m.degraded_steps;
  d["max_slack"] = m.max_slack;
  d["mean_qp_iterations"] = m.mean_qp_iterations;
  d["mean_solve_time"] = m.mean_solve_time;
  d["max_solve_time"] = m.max_solve_time;
  return d;
}

// Column-wise view of a log, one numpy array per log.csv column.
py::dict log_columns_dict(const SimLog& log)
{
  const std::size_t n = log.records.size();
  const std::vector<std::string> names = log_columns(log.n_obstacles);
  Eigen::MatrixXd M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < n; ++k) {
    const SimRecord& r = log.records[k];
    const auto row = static_cast<Eigen::Index>(k);
    Eigen::Index c = 0;
    for (double v : {r.t, r.ego.x, r.ego.y, r.ego.psi, r.ego.v, r.input.a, r.input.delta}) M(row, c++) = v;
    M(row, c++) = r.lead ? r.lead_position.x() : nan;
    M(row, c++) = r.lead ? r.lead_position.y() : nan;
    M(row, c++) = r.lead ? r.lead->v : nan;
    M(row, c++) = r.t_sh;
    M(row, c++) = r.h_acc;
    for (double h : r.h_obs) M(row, c++) = h;
    M(row, c++) = log.has_lead ? r.slack_acc : nan;
    for (double s : r.slack_obs) M(row, c++) = s;
  }
  py::dict d;
  for (std::size_t i = 0; i < names.size(); ++i) d[py::str(names[i])] = Eigen::VectorXd(M.col(static_cast<Eigen::Index>(i)));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "TSG-guided MPC-CBF adaptive cruise control";

  py::register_exception<ScenarioInvalid>(m, "ScenarioInvalid", PyExc_ValueError);

  py::class_<VehicleParams>(m, "VehicleParams")
      .def(py::init<>())
      .def_readwrite("l_f", &VehicleParams::l_f)
      .def_readwrite("l_r", &VehicleParams::l_r)
      .def_readwrite("a_min", &VehicleParams::a_min)
      .def_readwrite("a_max", &VehicleParams::a_max)
      .def_readwrite("delta_max", &VehicleParams::delta_max)
      .def_readwrite("v_max", &VehicleParams::v_max);

  m.def(
      "step",
      [](const Vector4& x, const Vector2& u, double dt, const VehicleParams& p) {
        return step(VehicleState::from_vec(x), {u(0), u(1)}, dt, p).vec();
      },
      py::arg("x"), py::arg("u"), py::arg("dt"), py::arg("params") = VehicleParams{},
      "One RK4 step of the kinematic bicycle; x = (x, y, psi, v), u = (a, delta).");
  m.def(
      "linearize",
      [](const Vector4& x, const Vector2& u, double dt, const VehicleParams& p) {
        const StateJacobians J = linearize(VehicleState::from_vec(x), {u(0), u(1)}, dt, p);
        return py::make_tuple(Matrix4(J.A), Matrix42(J.B), Vector4(J.c));
      },
      py::arg("x"), py::arg("u"), py::arg("dt"), py::arg("params") = VehicleParams{}, "Returns (A, B, c) of the step.");

  m.def(
      "h_acc",
      [](double gap, double v, double time_headway, double standstill) {
        AccCbfParams p;
        p.time_headway = time_headway;
        p.standstill = standstill;
        return h_acc(gap, v, p);
      },
      py::arg("gap"), py::arg("v"), py::arg("time_headway") = 1.2, py::arg("standstill") = 5.0);

  const auto c3bf = [](auto fn) {
    return [fn](const Vector4& x, const Vector2& p, const Vector2& v, double r, double eps_v) {
      C3bfParams prm;
      prm.eps_v = eps_v;
      const BarrierEvaluation e = fn(VehicleState::from_vec(x), Obstacle{p, v, r}, prm);
      return py::make_tuple(e.value, Vector4(e.grad_x));
    };
  };
  m.def("h_c3bf", c3bf(h_c3bf), py::arg("x"), py::arg("obs_position"), py::arg("obs_velocity"), py::arg("radius"),
        py::arg("eps_v") = 0.5, "Collision cone barrier; returns (value, gradient w.r.t. x).");
  m.def("relaxed_h", c3bf(relaxed_h), py::arg("x"), py::arg("obs_position"), py::arg("obs_velocity"), py::arg("radius"),
        py::arg("eps_v") = 0.5);
  m.def(
      "in_collision_cone",
      [](const Vector4& x, const Vector2& p, const Vector2& v, double r) {
        return in_collision_cone(VehicleState::from_vec(x), Obstacle{p, v, r}, C3bfParams{});
      },
      py::arg("x"), py::arg("obs_position"), py::arg("obs_velocity"), py::arg("radius"));

  m.def(
      "solve_qp",
      [](const Eigen::MatrixXd& H, const Eigen::VectorXd& g, std::optional<Eigen::MatrixXd> A,
         std::optional<Eigen::VectorXd> b, std::optional<Eigen::VectorXd> lb, std::optional<Eigen::VectorXd> ub,
         double tol, int max_iter) {
        DenseQp qp = DenseQp::unconstrained(H, g);
        if (A) qp.A = *A;
        if (b) qp.b = *b;
        if (lb) qp.lb = *lb;
        if (ub) qp.ub = *ub;
        try {
          qp.validate();
        } catch (const std::invalid_argument& e) {
          throw py::value_error(e.what());
        }
        QpSettings s;
        s.tol = tol;
        s.max_iter = max_iter;
        const QpSolution sol = solve(qp, s);
        py::dict d;
        d["z"] = sol.z;
        d["lam"] = sol.lam;
        d["mu"] = sol.mu;
        d["status"] = std::string(to_string(sol.status));
        d["iterations"] = sol.iterations;
        d["kkt_residual"] = sol.kkt_residual;
        return d;
      },
      py::arg("H"), py::arg("g"), py::arg("A") = py::none(), py::arg("b") = py::none(), py::arg("lb") = py::none(),
      py::arg("ub") = py::none(), py::arg("tol") = 1e-6, py::arg("max_iter") = 4000,
      "Minimize 1/2 z'Hz + g'z subject to A z <= b and lb <= z <= ub.");

  py::class_<Scenario>(m, "Scenario")
      .def_static("from_json", &parse_scenario, py::arg("text"))
      .def_static("load", &load_scenario, py::arg("path"))
      .def_readonly("name", &Scenario::name)
      .def_readonly("dt", &Scenario::dt)
      .def_readonly("duration", &Scenario::duration)
      .def_readonly("seed", &Scenario::seed)
      .def_property_readonly("has_lead", [](const Scenario& s) { return s.lead.has_value(); })
      .def_property_readonly("n_obstacles", [](const Scenario& s) { return s.obstacles.size(); })
      .def_property_readonly("governor", [](const Scenario& s) { return s.tsg.enabled; })
      .def("record_count", &Scenario::record_count)
      .def("validate", &Scenario::validate);

  m.def("set_scenario_param", &set_scenario_param, py::arg("text"), py::arg("path"), py::arg("value"));

  py::class_<SimResult>(m, "SimResult")
      .def_property_readonly("metrics", [](const SimResult& r) { return metrics_dict(r.metrics); })
      .def_property_readonly("columns", [](const SimResult& r) { return log_columns_dict(r.log); })
      .def_property_readonly("governor", [](const SimResult& r) { return r.log.governor; })
      .def("__len__", [](const SimResult& r) { return r.log.records.size(); })
      .def("log_csv",
           [](const SimResult& r) {
             std::ostringstream out;
             write_log_csv(out, r.log);
             return out.str();
           })
      .def("metrics_json", [](const SimResult& r, std::uint64_t seed) { return metrics_json(r.log, r.metrics, seed); },
           py::arg("seed") = 0)
      .def("emit", [](const SimResult& r, std::uint64_t seed, const std::filesystem::path& dir) { return emit_outputs(r, seed, dir); },
           py::arg("seed"), py::arg("out_dir"));

  m.def(
      "run",
      [](const Scenario& sc, std::optional<bool> governor, std::optional<std::uint64_t> seed) {
        py::gil_scoped_release release;
        return run(sc, {governor, seed});
      },
      py::arg("scenario"), py::arg("governor") = py::none(), py::arg("seed") = py::none(),
      "Closed-loop simulation; governor and seed override the scenario when given.");
}
