#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nfsde/commands.hpp"
#include "nfsde/config.hpp"
#include "nfsde/errors.hpp"
#include "nfsde/girsanov.hpp"
#include "nfsde/ot.hpp"
#include "nfsde/tci.hpp"

namespace py = pybind11;
using namespace nfsde;

namespace {

// (points, d) array -> path on [-tau, T] with grid step dt.
SegmentPath path_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a, double dt,
                            double tau) {
  if (a.ndim() != 2) throw DomainError("path arrays must be two-dimensional (points, d)");
  const int points = static_cast<int>(a.shape(0));
  const int dim = static_cast<int>(a.shape(1));
  const int n_tau = grid_steps(tau, dt, "tau");
  if (points < n_tau + 1) throw DomainError("path is shorter than its initial segment");
  std::vector<double> v(a.data(), a.data() + a.size());
  return SegmentPath(dt, n_tau, points - n_tau - 1, dim, std::move(v));
}

py::array_t<double> path_to_array(const SegmentPath& p) {
  py::array_t<double> out({p.points(), p.dim()});
  std::copy(p.values().begin(), p.values().end(), out.mutable_data());
  return out;
}

CostMatrix cost_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& c) {
  if (c.ndim() != 2 || c.shape(0) != c.shape(1)) throw DomainError("cost matrix must be square");
  CostMatrix m;
  m.n = static_cast<std::size_t>(c.shape(0));
  m.cost.assign(c.data(), c.data() + c.size());
  return m;
}

ExperimentConfig config_from(const std::string& text, const std::vector<std::string>& overrides) {
  auto raw = nlohmann::json::parse(text);
  for (const auto& o : overrides) apply_override(raw, o);
  return parse_config(raw);
}

AlphaVariant variant_from(const std::string& v) {
  if (v == "derivation") return AlphaVariant::derivation;
  if (v == "display") return AlphaVariant::display;
  throw ValidationError("variant", "must be 'derivation' or 'display'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neutral functional SDE simulation and transportation-cost inequality checks";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<CheckerFailure>(m, "CheckerFailure", error.ptr());
  py::register_exception<DomainError>(m, "DomainError", error.ptr());
  py::register_exception<SizeError>(m, "SizeError", error.ptr());

  m.def("alpha", [](double T, double kappa, double l1, double l2, double l3, const std::string& variant) {
        return alpha(T, kappa, l1, l2, l3, variant_from(variant));
      },
      py::arg("T"), py::arg("kappa"), py::arg("lambda1"), py::arg("lambda2"), py::arg("lambda3"),
      py::arg("variant") = "derivation");
  m.def("beta", &beta, py::arg("T"), py::arg("kappa"), py::arg("lambda1"), py::arg("lambda2"));
  m.def("c_lambda", &c_lambda, py::arg("lam"), py::arg("k"), py::arg("k1"), py::arg("k2"), py::arg("lambda3"));
  m.def("theorem31_coefficients",
        [](int which, double lam, double k, double k1, double k2, double l3, double tau) {
          const auto c = theorem31_coefficients(which == 1 ? L2Case::one : L2Case::two, lam, k, k1, k2, l3, tau);
          return std::make_pair(c.entropy_coeff, c.initial_coeff);
        },
        py::arg("case"), py::arg("lam"), py::arg("k"), py::arg("k1"), py::arg("k2"), py::arg("lambda3"), py::arg("tau"));

  m.def("rho_inf", [](const py::array_t<double>& a, const py::array_t<double>& b, double dt, double tau) {
        return rho_inf_path(path_from_array(a, dt, tau), path_from_array(b, dt, tau));
      },
      py::arg("a"), py::arg("b"), py::arg("dt"), py::arg("tau"));
  m.def("rho_2_lambda",
        [](const py::array_t<double>& a, const py::array_t<double>& b, double dt, double tau, double lam) {
          return rho_2_lambda_path(path_from_array(a, dt, tau), path_from_array(b, dt, tau), lam);
        },
        py::arg("a"), py::arg("b"), py::arg("dt"), py::arg("tau"), py::arg("lam"));

  m.def("exact_w2", [](const py::array_t<double>& c) { return exact_w2(cost_from_array(c)); }, py::arg("cost"),
        "sqrt of the minimum mean assigned cost; entries are squared distances.");
  m.def("sinkhorn_w2",
        [](const py::array_t<double>& c, double rel_eps, const std::optional<py::array_t<double>>& aa,
           const std::optional<py::array_t<double>>& bb) {
          const CostMatrix ab = cost_from_array(c);
          SinkhornOptions opt;
          opt.epsilon = relative_epsilon(ab, rel_eps);
          std::optional<CostMatrix> ma, mb;
          if (aa) ma = cost_from_array(*aa);
          if (bb) mb = cost_from_array(*bb);
          const auto r = sinkhorn_w2(ab, opt, ma ? &*ma : nullptr, mb ? &*mb : nullptr);
          py::dict d;
          d["estimate"] = r.estimate;
          d["debiased"] = r.debiased;
          d["converged"] = r.converged;
          d["iterations"] = r.iterations;
          return d;
        },
        py::arg("cost"), py::arg("epsilon_rel") = 0.01, py::arg("self_a") = py::none(),
        py::arg("self_b") = py::none());

  m.def("config_hash", [](const std::string& text, const std::vector<std::string>& overrides) {
        return config_from(text, overrides).hash();
      },
      py::arg("config"), py::arg("overrides") = std::vector<std::string>{});
  m.def("simulate",
        [](const std::string& text, const std::vector<std::string>& overrides) {
          const auto cfg = config_from(text, overrides);
          PathEnsemble ens;
          {
            py::gil_scoped_release release;
            ens = simulate_ensemble(cfg.coeffs, cfg.initial, cfg.sim);
          }
          py::list out;
          for (const auto& p : ens.paths) out.append(path_to_array(p));
          return py::make_tuple(out, ens.seeds);
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
        "Paths as (points, d) arrays on [-tau, T] and their noise seeds.");
  m.def("couple_summary",
        [](const std::string& text, const std::vector<std::string>& overrides) {
          const auto cfg = config_from(text, overrides);
          py::gil_scoped_release release;
          const auto r = coupled_simulate(cfg.coeffs, cfg.initial, cfg.sim, cfg.tilt);
          return r.summary().dump();
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{});
  m.def("verify",
        [](const std::string& text, const std::vector<std::string>& overrides) {
          const auto cfg = config_from(text, overrides);
          py::gil_scoped_release release;
          auto doc = verify_inequality(cfg.inequality).to_json();
          doc["config_hash"] = cfg.hash();
          return doc.dump();
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{});
  m.def("constants",
        [](const std::optional<double>& T, const std::optional<double>& kappa, const std::optional<double>& l1,
           const std::optional<double>& l2, const std::optional<double>& l3, const std::optional<double>& lam,
           const std::optional<double>& k, const std::optional<double>& k1, const std::optional<double>& k2,
           const std::optional<double>& tau) {
          return evaluate_constants(ConstantsQuery{T, kappa, l1, l2, l3, lam, k, k1, k2, tau}).dump();
        },
        py::kw_only(), py::arg("T") = py::none(), py::arg("kappa") = py::none(), py::arg("l1") = py::none(),
        py::arg("l2") = py::none(), py::arg("l3") = py::none(), py::arg("lam") = py::none(),
        py::arg("k") = py::none(), py::arg("k1") = py::none(), py::arg("k2") = py::none(),
        py::arg("tau") = py::none());
}
