#include "nfsde/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nfsde/errors.hpp"
#include "nfsde/girsanov.hpp"
#include "nfsde/ot.hpp"
#include "nfsde/rng.hpp"

namespace nfsde {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void enter(const RunContext& ctx, const char* name) {
  if (ctx.stage) ctx.stage->enter(name);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json manifest_base(const ExperimentConfig& cfg, const char* command) {
  return json{{"schema_version", kSchemaVersion},
              {"command", command},
              {"config_hash", cfg.hash()},
              {"config", cfg.raw},
              {"seed", cfg.sim.seed},
              {"timestamp", utc_timestamp()}};
}

void check_unit_interval(const std::optional<double>& v, const char* field, const char* tag) {
  if (v && !(*v >= 0.0 && *v < 1.0)) throw ValidationError(field, std::string(tag) + " requires a value in [0, 1)");
}

// Records the outcome of one constant; errors are kept, not thrown.
template <class Fn>
void attempt(json& row, const char* key, Fn&& fn) {
  try {
    row[key] = fn();
  } catch (const DomainError& e) {
    row["errors"].push_back(std::string(key) + ": " + e.what());
  }
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << text;
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

json evaluate_constants(const ConstantsQuery& q) {
  check_unit_interval(q.kappa, "kappa", "(A1)");
  check_unit_interval(q.k, "k", "(B1)");
  json row = json::object();
  row["errors"] = json::array();
  const double kappa = q.kappa.value_or(0.0);
  const double l1 = q.l1.value_or(0.0);
  const double l2 = q.l2.value_or(0.0);
  const double l3 = q.l3.value_or(1.0);
  const double lambda = q.lambda.value_or(0.0);
  if (q.T) {
    attempt(row, "alpha", [&] { return alpha(*q.T, kappa, l1, l2, l3, q.variant); });
    attempt(row, "beta", [&] { return beta(*q.T, kappa, l1, l2); });
  }
  if (q.k1 && q.k2) {
    const double k = q.k.value_or(0.0);
    attempt(row, "c_lambda", [&] { return c_lambda(lambda, k, *q.k1, *q.k2, l3); });
    if (q.tau) {
      const L2Case which = lambda == 0.0 ? L2Case::one : L2Case::two;
      attempt(row, "thm31", [&] {
        const auto c = theorem31_coefficients(which, lambda, k, *q.k1, *q.k2, l3, *q.tau);
        return json{{"case", static_cast<int>(which)}, {"entropy_coeff", c.entropy_coeff},
                    {"initial_coeff", c.initial_coeff}};
      });
    }
  }
  if (q.lambda && *q.lambda > 0.0 && (q.l1 || q.l2)) {
    attempt(row, "summability", [&] {
      const auto s = remark21_summability(lambda, kappa, l1, l2, l3, q.variant);
      return json{{"condition", s.condition}, {"threshold", s.threshold}, {"partial_sum_50", s.partial_sums.back()}};
    });
  }
  return row;
}

SweepAxis parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ValidationError("--sweep", "expected name=start:stop:count");
  SweepAxis axis;
  axis.name = text.substr(0, eq);
  std::stringstream ss(text.substr(eq + 1));
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c)) {
    throw ValidationError("--sweep", "expected name=start:stop:count");
  }
  double start = 0, stop = 0;
  int count = 0;
  try {
    start = std::stod(a);
    stop = std::stod(b);
    count = std::stoi(c);
  } catch (const std::exception&) {
    throw ValidationError("--sweep", "start, stop and count must be numbers");
  }
  if (count < 1) throw ValidationError("--sweep", "count must be >= 1");
  for (int i = 0; i < count; ++i) {
    axis.values.push_back(count == 1 ? start : start + (stop - start) * i / (count - 1));
  }
  return axis;
}

namespace {

std::optional<double>* query_slot(ConstantsQuery& q, const std::string& name) {
  if (name == "T") return &q.T;
  if (name == "kappa") return &q.kappa;
  if (name == "l1") return &q.l1;
  if (name == "l2") return &q.l2;
  if (name == "l3") return &q.l3;
  if (name == "lambda") return &q.lambda;
  if (name == "k") return &q.k;
  if (name == "k1") return &q.k1;
  if (name == "k2") return &q.k2;
  if (name == "tau") return &q.tau;
  return nullptr;
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(17) << *v;
  return os.str();
}

std::string cell(const json& row, const char* key) {
  if (!row.contains(key)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << row.at(key).get<double>();
  return os.str();
}

}  // namespace

void constants_sweep_csv(const ConstantsQuery& base, const std::vector<SweepAxis>& axes, std::ostream& os) {
  for (const auto& a : axes) {
    ConstantsQuery probe;
    if (!query_slot(probe, a.name)) throw ValidationError("--sweep", "unknown parameter '" + a.name + "'");
  }
  os << "T,kappa,l1,l2,l3,lambda,k,k1,k2,tau,alpha,beta,c_lambda,thm31_entropy_coeff,thm31_initial_coeff,"
        "summable,error\n";
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    ConstantsQuery q = base;
    for (std::size_t i = 0; i < axes.size(); ++i) *query_slot(q, axes[i].name) = axes[i].values[idx[i]];
    json row;
    std::string error;
    try {
      row = evaluate_constants(q);
      for (const auto& e : row["errors"]) error += (error.empty() ? "" : "; ") + e.get<std::string>();
    } catch (const ValidationError& e) {
      error = e.what();
    }
    os << cell(q.T) << ',' << cell(q.kappa) << ',' << cell(q.l1) << ',' << cell(q.l2) << ',' << cell(q.l3) << ','
       << cell(q.lambda) << ',' << cell(q.k) << ',' << cell(q.k1) << ',' << cell(q.k2) << ',' << cell(q.tau) << ','
       << cell(row, "alpha") << ',' << cell(row, "beta") << ',' << cell(row, "c_lambda") << ',';
    if (row.contains("thm31")) {
      os << cell(row["thm31"], "entropy_coeff") << ',' << cell(row["thm31"], "initial_coeff");
    } else {
      os << ',';
    }
    os << ',';
    if (row.contains("summability")) os << (row["summability"]["condition"].get<bool>() ? "true" : "false");
    // Quote the message: it may contain commas.
    std::string quoted;
    for (char ch : error) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    os << ",\"" << quoted << "\"\n";

    std::size_t i = 0;
    for (; i < axes.size(); ++i) {
      if (++idx[i] < axes[i].values.size()) break;
      idx[i] = 0;
    }
    if (i == axes.size()) break;
  }
}

json run_simulate(const ExperimentConfig& cfg, const RunContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  enter(ctx, "simulate");
  const PathEnsemble ens = simulate_ensemble(cfg.coeffs, cfg.initial, cfg.sim);
  enter(ctx, "write");
  json manifest = manifest_base(cfg, "simulate");
  json files = json::array();
  for (std::size_t i = 0; i < ens.size(); ++i) {
    std::ostringstream name;
    name << "paths/path_" << std::setw(5) << std::setfill('0') << i << ".txt";
    std::ostringstream body;
    write_path(body, ens.paths[i]);
    write_text(ctx.out_dir / name.str(), body.str());
    files.push_back(json{{"file", name.str()},
                         {"seed", ens.seeds[i]},
                         {"fnv1a64", hex64(fnv1a64(body.str()))}});
  }
  manifest["paths"] = std::move(files);
  manifest["runtime_seconds"] = seconds_since(t0);
  write_text(ctx.out_dir / "manifest.json", manifest.dump(2) + "\n");
  if (ctx.log) *ctx.log << "simulated " << ens.size() << " paths into " << ctx.out_dir.string() << "\n";
  return manifest;
}

json run_couple(const ExperimentConfig& cfg, const RunContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  enter(ctx, "coupling");
  const CouplingResult coupled = coupled_simulate(cfg.coeffs, cfg.initial, cfg.sim, cfg.tilt);
  const EntropyEstimate ent = relative_entropy(coupled);
  json doc{{"schema_version", kSchemaVersion}, {"config_hash", cfg.hash()}, {"summary", coupled.summary()}};
  doc["entropy"] = json{{"value", ent.value}, {"std_error", ent.std_error}};
  if (cfg.tilt.kind == GirsanovTilt::Kind::constant || cfg.tilt.is_zero()) {
    const Segment probe = cfg.initial.draw(0);
    bool clipped = false;
    const Vector h = cfg.tilt.evaluate(0.0, probe.view(), clipped);
    doc["entropy"]["closed_form"] = 0.5 * h.squaredNorm() * cfg.sim.T;
  }
  enter(ctx, "importance");
  const int d0 = 0;
  const PathFunctional phi = [d0](const SegmentPath& p) {
    return std::tanh(p.value_at_step(p.n_steps())(d0));
  };
  doc["importance"] = importance_check(cfg.coeffs, cfg.initial, cfg.sim, cfg.tilt, phi).to_json();
  doc["importance"]["functional"] = "tanh(X(T)_1)";
  enter(ctx, "write");
  if (cfg.output.json) write_text(ctx.out_dir / "coupling.json", doc.dump(2) + "\n");
  if (cfg.output.per_path_csv) {
    std::ostringstream os;
    coupled.write_csv(os);
    write_text(ctx.out_dir / "coupling_paths.csv", os.str());
  }
  json manifest = manifest_base(cfg, "couple");
  manifest["runtime_seconds"] = seconds_since(t0);
  write_text(ctx.out_dir / "manifest.json", manifest.dump(2) + "\n");
  if (ctx.log) {
    *ctx.log << "entropy " << ent.value << " (se " << ent.std_error << "), importance z "
             << doc["importance"]["z_score"].get<double>() << "\n";
  }
  return doc;
}

TCIReport run_verify(const ExperimentConfig& cfg, const RunContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  enter(ctx, "verify");
  if (cfg.inequality.solver == OtSolver::exact && static_cast<std::size_t>(cfg.sim.n_paths) > kExactW2Cap) {
    throw ValidationError("sim.n_paths", "the exact solver supports at most " + std::to_string(kExactW2Cap) +
                                             " paths; use solver 'sinkhorn'");
  }
  TCIReport report = verify_inequality(cfg.inequality);
  enter(ctx, "write");
  json doc = report.to_json();
  doc["config_hash"] = cfg.hash();
  if (cfg.output.json) write_text(ctx.out_dir / "report.json", doc.dump(2) + "\n");
  if (cfg.output.csv) write_text(ctx.out_dir / "report.csv", TCIReport::csv_header() + "\n" + report.csv_row() + "\n");
  json manifest = manifest_base(cfg, "verify");
  manifest["runtime_seconds"] = seconds_since(t0);
  write_text(ctx.out_dir / "manifest.json", manifest.dump(2) + "\n");
  if (ctx.log) *ctx.log << format_report(report);
  return report;
}

namespace {

json study_json(const ConvergenceStudy& s) {
  return json{{"dts", s.dts}, {"errors", s.errors}, {"reference_dt", s.reference_dt}, {"order", s.observed_order}};
}

}  // namespace

json run_convergence(const ExperimentConfig& cfg, const RunContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  enter(ctx, "convergence");
  if (!cfg.initial.dirac) throw ValidationError("initial.kind", "convergence studies need a constant initial segment");
  // Every level must pass the same stability guard as a plain simulation.
  for (double dt : cfg.convergence.dts) {
    SimConfig probe = cfg.sim;
    probe.dt = dt;
    probe.validate(cfg.coeffs.declared.kappa, &cfg.coeffs);
  }
  const Segment xi = cfg.initial.draw(0);
  const Vector value = xi.endpoint();
  const auto initial = [value](double) { return value; };
  const auto& c = cfg.convergence;

  const ConvergenceStudy stochastic =
      strong_convergence(cfg.coeffs, initial, cfg.sim.tau, cfg.sim.T, c.dts, c.refinement, c.n_paths, cfg.sim.seed,
                         cfg.sim.threads);
  CoefficientSet ode = cfg.coeffs;
  const int d = ode.dim, m = ode.noise_dim;
  ode.sigma = [d, m](const SegmentView&) { return Matrix::Zero(d, m); };
  ode.name += " (sigma = 0)";
  const ConvergenceStudy deterministic =
      strong_convergence(ode, initial, cfg.sim.tau, cfg.sim.T, c.dts, c.refinement, 1, cfg.sim.seed, 1);

  json doc{{"schema_version", kSchemaVersion},
           {"config_hash", cfg.hash()},
           {"model", cfg.coeffs.name},
           {"refinement", c.refinement},
           {"n_paths", c.n_paths},
           {"stochastic", study_json(stochastic)},
           {"deterministic", study_json(deterministic)}};
  enter(ctx, "write");
  if (cfg.output.json) write_text(ctx.out_dir / "convergence.json", doc.dump(2) + "\n");
  if (cfg.output.csv) {
    std::ostringstream os;
    os << std::setprecision(17) << "dt,stochastic_rms_error,deterministic_error\n";
    for (std::size_t i = 0; i < c.dts.size(); ++i) {
      os << c.dts[i] << ',' << stochastic.errors[i] << ',' << deterministic.errors[i] << '\n';
    }
    write_text(ctx.out_dir / "convergence.csv", os.str());
  }
  json manifest = manifest_base(cfg, "convergence");
  manifest["runtime_seconds"] = seconds_since(t0);
  write_text(ctx.out_dir / "manifest.json", manifest.dump(2) + "\n");
  if (ctx.log) {
    *ctx.log << "strong order " << stochastic.observed_order << ", deterministic order "
             << deterministic.observed_order << "\n";
  }
  return doc;
}

std::string format_report(const TCIReport& r) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "inequality   " << to_string(r.id) << " (" << r.metric << ")\n";
  os << "samples      " << r.n_paths << ", solver " << r.solver << ", bootstrap " << r.bootstrap << "\n";
  os << "lhs W2       " << r.lhs << "  CI [" << r.lhs_ci_lo << ", " << r.lhs_ci_hi << "]  floor " << r.floor << "\n";
  os << "entropy      " << r.entropy << " (se " << r.entropy_se << ")\n";
  os << "rhs          " << r.rhs << " = " << r.entropy_coeff << " * sqrt(Ent) + " << r.initial_coeff << " * "
     << r.initial_w2 << "\n";
  os << "margin       " << r.margin << "\n";
  os << "coupling     W2 " << r.coupled_w2 << " <= bound " << r.coupling_upper_bound << ": "
     << (r.coupling_domination ? "yes" : "NO") << "\n";
  os << "result       " << (r.pass ? "PASS" : "FAIL") << "\n";
  return os.str();
}

}  // namespace nfsde
