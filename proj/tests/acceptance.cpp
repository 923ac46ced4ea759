// Acceptance suite: one PASS/FAIL line per criterion.
//   nfsde_acceptance [--only N]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "nfsde/commands.hpp"
#include "nfsde/config.hpp"
#include "nfsde/girsanov.hpp"
#include "nfsde/ot.hpp"
#include "nfsde/rng.hpp"
#include "nfsde/stats.hpp"
#include "nfsde/tci.hpp"
#include "oracles.hpp"

using namespace nfsde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAILED]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

ExperimentConfig load_repo_config(const std::string& name, const std::vector<std::string>& overrides = {}) {
  return load_config(std::string(NFSDE_SOURCE_DIR) + "/configs/" + name, overrides);
}

Outcome constants_exactness() {
  Outcome o;
  const double a = alpha(1, 0, 1, 0, 1), b = beta(1, 0, 1, 0), c = c_lambda(0, 0, 2, 1, 1);
  o.require(std::abs(a - 2) <= 1e-12 && std::abs(b - 2) <= 1e-12, fmt("alpha=%.15g", a) + fmt(" beta=%.15g", b));
  o.require(std::abs(c - 4) <= 1e-12, fmt("C(0)=%.15g", c));
  CounterRng rng(31415, 0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double T = 0.1 + 2.9 * rng.uniform();
    const double kappa = 0.7 * rng.uniform();
    const double l1 = -1.0 + 5.0 * rng.uniform();
    const double l2 = i % 10 == 0 ? 0.0 : 0.5 * rng.uniform();
    const double l3 = 0.1 + 3.0 * rng.uniform();
    const double k = 0.95 * rng.uniform();
    const double k2 = 2.0 * rng.uniform();
    const double k1 = k2 + 0.05 + 2.0 * rng.uniform();
    const double lam = i % 2 == 0 ? 0.0 : 3.0 * rng.uniform();
    const auto rel = [](double x, double y) { return std::abs(x - y) / std::abs(y); };
    worst = std::max({worst, rel(alpha(T, kappa, l1, l2, l3), oracle::alpha(T, kappa, l1, l2, l3)),
                      rel(beta(T, kappa, l1, l2), oracle::beta(T, kappa, l1, l2)),
                      rel(c_lambda(lam, k, k1, k2, l3), oracle::c_lambda(lam, k, k1, k2, l3))});
  }
  o.require(worst <= 1e-12, fmt("1000 tuples vs generic-bound evaluator, worst rel %.2e", worst));
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const int dim = 1 + static_cast<int>(s % 3);
    const SegmentPath a = random_walk_path(2 * s, 1.0 / 32, 0.25, 1.0, dim);
    const SegmentPath b = random_walk_path(2 * s + 1, 1.0 / 32, 0.25, 1.0, dim);
    const double lam = 0.25 * static_cast<double>(s % 5);
    const auto x = a.initial_segment(), y = b.initial_segment();
    const double pairs[][2] = {{rho_uniform(x, y), oracle::rho_uniform(a, b)},
                               {rho_2(x, y), oracle::rho_2(a, b)},
                               {rho_2_tilde(x, y), oracle::rho_2_tilde(a, b)},
                               {rho_inf_weighted(a, b, lam), oracle::rho_inf_weighted(a, b, lam)},
                               {rho_2_lambda_path(a, b, lam), oracle::rho_2_lambda(a, b, lam)},
                               {rho_inf_path(a, b), oracle::rho_inf_path(a, b)}};
    for (const auto& p : pairs) worst = std::max(worst, std::abs(p[0] - p[1]) / std::max(1.0, std::abs(p[1])));
  }
  o.require(worst <= 1e-10, fmt("100 pairs, worst deviation %.2e", worst));
  int broken = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const SegmentPath a = random_walk_path(3 * s + 7, 1.0 / 32, 0.25, 0.5, 2);
    const SegmentPath b = random_walk_path(3 * s + 8, 1.0 / 32, 0.25, 0.5, 2);
    const SegmentPath c = random_walk_path(3 * s + 9, 1.0 / 32, 0.25, 0.5, 2);
    for (const auto m : {SegmentMetric::uniform, SegmentMetric::l2, SegmentMetric::l2_tilde}) {
      const auto x = a.initial_segment(), y = b.initial_segment(), z = c.initial_segment();
      if (segment_distance(m, x, z) > segment_distance(m, x, y) + segment_distance(m, y, z) + 1e-12) ++broken;
    }
    for (const PathMetric m : {PathMetric::weighted(0.5), PathMetric::l2(0.5)}) {
      if (m(a, c) > m(a, b) + m(b, c) + 1e-12) ++broken;
    }
  }
  o.require(broken == 0, "triangle inequality on 1000 triples, " + std::to_string(broken) + " violations");
  return o;
}

Outcome lemma_suite() {
  Outcome o;
  LinearExample ex;
  ex.k = 0.5;
  const double dt = 1.0 / 32, tau = 0.25;
  const auto c = linear_coefficients(ex, grid_steps(tau, dt, "tau"));
  std::size_t violations = 0, pairs_total = 0;
  double worst = 1e300;
  for (double lambda : {0.0, 0.5}) {
    std::vector<std::pair<SegmentPath, SegmentPath>> pairs;
    for (std::uint64_t i = 0; i < 5000; ++i) {
      const std::uint64_t s = i + (lambda > 0 ? 100000 : 0);
      pairs.emplace_back(random_walk_path(2 * s, dt, tau, 1.0, 1 + s % 2),
                         random_walk_path(2 * s + 1, dt, tau, 1.0, 1 + s % 2));
    }
    const auto rep = lemma30_suite(c.G, 0.5, pairs, uniform_delay_weights(8), lambda);
    pairs_total += rep.pairs;
    for (int j = 0; j < 3; ++j) {
      violations += rep.violations[j];
      worst = std::min(worst, rep.worst_slack[j]);
    }
  }
  o.require(violations == 0 && pairs_total == 10000,
            std::to_string(pairs_total) + " pairs, " + std::to_string(violations) + " violations" +
                fmt(", smallest relative slack %.2e", worst));
  return o;
}

Outcome integrator_orders() {
  Outcome o;
  const ExperimentConfig cfg = load_repo_config("delay_convergence.json");
  const auto& c = cfg.convergence;
  const auto initial = [](double) { return Vector::Constant(1, 1.0); };
  const auto strong = strong_convergence(cfg.coeffs, initial, cfg.sim.tau, cfg.sim.T, c.dts, c.refinement,
                                         c.n_paths, cfg.sim.seed, cfg.sim.threads);
  o.require(strong.observed_order >= 0.35 && strong.observed_order <= 0.65,
            fmt("strong order %.3f (multiplicative noise, 2000 paths, reference dt/64)", strong.observed_order));
  const auto ode = linear_delay_coefficients(1.0, 0.5, 0.0, false);
  const auto det = strong_convergence(ode, initial, cfg.sim.tau, cfg.sim.T, c.dts, c.refinement, 1, 1, 1);
  o.require(det.observed_order >= 0.8 && det.observed_order <= 1.2,
            fmt("deterministic order %.3f", det.observed_order));
  // Informational: additive noise makes Euler-Maruyama strong order one.
  const auto additive = linear_delay_coefficients(1.0, 0.5, 0.3, false);
  const auto add = strong_convergence(additive, initial, cfg.sim.tau, cfg.sim.T, c.dts, c.refinement, c.n_paths,
                                      cfg.sim.seed, cfg.sim.threads);
  o.detail += fmt("; additive-noise order %.3f (diagnostic only)", add.observed_order);
  return o;
}

Outcome girsanov_identities() {
  Outcome o;
  SimConfig cfg;
  cfg.seed = 404;
  const auto origin = InitialLaw::point(Segment::constant(cfg.dt, cfg.tau, Vector::Zero(2)));
  const auto bm = brownian_coefficients(2);
  const Vector h = (Vector(2) << 0.3, -0.4).finished();
  cfg.dim = cfg.noise_dim = 2;
  cfg.n_paths = 256;
  const auto r = coupled_simulate(bm, origin, cfg, GirsanovTilt::constant(h, h.norm()));
  const double ent = relative_entropy(r).value, exact = 0.5 * h.squaredNorm() * cfg.T;
  o.require(std::abs(ent - exact) <= 4 * std::numeric_limits<double>::epsilon() * exact,
            fmt("entropy %.17g vs |h|^2 T/2 = %.17g", ent, exact));

  cfg.n_paths = 10000;
  const auto tilt = GirsanovTilt::feedback_tanh(Vector::Constant(2, 0.8), 0.8 * std::sqrt(2.0));
  const auto logf = observed_log_density(bm, origin, cfg, tilt, static_cast<std::uint64_t>(StreamPurpose::importance));
  std::vector<double> f;
  for (double l : logf) f.push_back(std::exp(l));
  const auto m = mean_se(f);
  o.require(std::abs(m.mean - 1.0) <= 3 * m.se, fmt("E_P[F] = %.4f (se %.4f), n = 10^4", m.mean, m.se));

  SimConfig one;
  one.n_paths = 10000;
  one.seed = 505;
  const double h1 = 0.5;
  const PathFunctional endpoint = [](const SegmentPath& p) { return p.value_at_step(p.n_steps())(0); };
  const auto rep =
      importance_check(brownian_coefficients(1), InitialLaw::point(Segment::constant(one.dt, one.tau, Vector::Zero(1))),
                       one, GirsanovTilt::constant(Vector::Constant(1, h1), h1), endpoint);
  const double shift_z = (rep.weighted_mean - h1 * one.T) / rep.weighted_se;
  o.require(std::abs(rep.z_score) < 3 && std::abs(shift_z) < 3,
            fmt("Gaussian shift: importance z %.3f", rep.z_score) + fmt(", z vs hT %.3f", shift_z));
  return o;
}

Outcome ot_correctness() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const std::size_t n = 1 + s % 6;
    CounterRng rng(s, 1);
    CostMatrix c;
    c.n = n;
    for (std::size_t i = 0; i < n * n; ++i) c.cost.push_back(s % 3 == 0 ? double(rng.below(4)) : 10 * rng.uniform());
    worst = std::max(worst, std::abs(exact_w2(c) - oracle::brute_w2(c.cost, n)));
  }
  o.require(worst <= 1e-9, fmt("100 instances n <= 6 vs permutations, worst %.2e", worst));

  SimConfig cfg;
  cfg.n_paths = 128;
  cfg.seed = 606;
  const auto origin = InitialLaw::point(Segment::constant(cfg.dt, cfg.tau, Vector::Zero(1)));
  const auto bm = brownian_coefficients(1);
  const auto tilted = coupled_simulate(bm, origin, cfg, GirsanovTilt::constant(Vector::Constant(1, 0.5), 0.5));
  const auto ref = simulate_ensemble(bm, origin, cfg, nullptr, 5, 128);
  LinearExample ex;
  ex.k = 0.3;
  ex.c1 = -2.0;
  ex.c3 = 1.0;
  ex.sigma_cap = 1.0;
  const auto lin = linear_coefficients(ex, cfg.n_tau());
  const auto one = InitialLaw::point(Segment::constant(cfg.dt, cfg.tau, Vector::Constant(1, 1.0)));
  const auto lin_x = coupled_simulate(lin, one, cfg, GirsanovTilt::constant(Vector::Constant(1, 0.5), 0.5));
  const auto lin_b = simulate_ensemble(lin, one, cfg, nullptr, 5, 128);
  struct Case {
    const char* name;
    const PathEnsemble* a;
    const PathEnsemble* b;
    PathMetric metric;
  };
  const Case cases[] = {{"brownian/rho_inf", &tilted.x_paths, &ref, PathMetric::uniform()},
                        {"linear/rho_2", &lin_x.x_paths, &lin_b, PathMetric::l2(0.0)},
                        {"linear/rho_inf", &lin_x.x_paths, &lin_b, PathMetric::uniform()}};
  for (const auto& cs : cases) {
    const CostMatrix ab = cost_matrix(*cs.a, *cs.b, cs.metric), aa = cost_matrix(*cs.a, *cs.a, cs.metric),
                     bb = cost_matrix(*cs.b, *cs.b, cs.metric);
    const double exact = exact_w2(ab);
    SinkhornOptions opt;
    opt.epsilon = relative_epsilon(ab, 0.01);
    const double sk = sinkhorn_w2(ab, opt, &aa, &bb).debiased;
    const double gap = std::abs(sk - exact) / exact;
    o.require(gap <= 0.05, std::string(cs.name) + fmt(" n=128 debiased gap %.2f%%", 100 * gap));
  }
  return o;
}

Outcome coupling_domination() {
  Outcome o;
  int runs = 0, failures = 0;
  double worst = -1e300;
  const char* configs[] = {"brownian_verify.json", "linear_verify.json"};
  for (const char* name : configs) {
    for (const char* tilt : {R"(tilt={"kind":"constant","h":0.5,"h_bound":0.5})",
                             R"(tilt={"kind":"feedback_tanh","c":0.8,"h_bound":0.8})"}) {
      const auto cfg = load_repo_config(name, {"sim.n_paths=128", tilt});
      const auto r = coupled_simulate(cfg.coeffs, cfg.initial, cfg.sim, cfg.tilt);
      for (const PathMetric m : {PathMetric::uniform(), PathMetric::weighted(1.0), PathMetric::l2(0.0),
                                 PathMetric::l2(1.0)}) {
        const double w = exact_w2(cost_matrix(r.x_paths, r.y_paths, m));
        const double ub = coupling_upper_bound(r, m);
        worst = std::max(worst, w - ub);
        ++runs;
        if (w > ub + 1e-9) ++failures;
      }
    }
  }
  o.require(failures == 0, std::to_string(runs) + " coupled runs x metrics" + fmt(", max(W2 - bound) = %.2e", worst));
  return o;
}

Outcome end_to_end() {
  Outcome o;
  for (const char* name : {"brownian_verify.json", "linear_verify.json"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = load_repo_config(name);
    const TCIReport r = verify_inequality(cfg.inequality);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double corrected = r.lhs_ci_hi - r.floor;
    std::string what = std::string(name) + fmt(": ci_hi - floor = %.4f", corrected) + fmt(" <= rhs %.4f", r.rhs) +
                       fmt(" (lhs %.4f, floor %.4f)", r.lhs, r.floor) + fmt(", %.1f s", secs);
    o.require(r.pass && corrected <= r.rhs && secs < 600, what);
    o.require(r.coupling_domination, std::string(name) + fmt(": coupled W2 %.4f <= bound", r.coupled_w2));
    if (r.id == InequalityId::uniform_thm21) {
      const double hT = 0.5 * cfg.sim.T;
      o.require(corrected <= hT && r.coupled_w2 <= hT + 1e-12,
                fmt("shift bound hT = %.3f dominates ci_hi - floor", hT) + fmt(" and coupled W2 %.4f", r.coupled_w2));
    }
  }
  return o;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome reproducibility() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "nfsde_acceptance_repro";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"run1_t1", "threads=1"}, {"run2_t1", "threads=1"}, {"run3_t4", "threads=4"}};
  for (const auto& [dir, threads] : runs) {
    const auto cfg = load_repo_config("linear_verify.json", {"sim.n_paths=128", threads});
    run_verify(cfg, {root / dir / "verify", nullptr, nullptr});
    run_simulate(cfg, {root / dir / "simulate", nullptr, nullptr});
  }
  bool same = true;
  std::size_t files = 0;
  for (const char* f : {"verify/report.json", "verify/report.csv", "simulate/paths/path_00000.txt",
                        "simulate/paths/path_00127.txt"}) {
    const std::string base = read_file(root / "run1_t1" / f);
    same = same && !base.empty() && base == read_file(root / "run2_t1" / f) && base == read_file(root / "run3_t4" / f);
    ++files;
  }
  // The report carries no timestamp or runtime; the hash ties it to the config.
  o.require(same, std::to_string(files) + " artifacts byte-identical across 2 runs and 1 vs 4 threads");
  fs::remove_all(root);
  return o;
}

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;  // 0 = no runtime requirement
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  const Criterion criteria[] = {
      {1, "constants exactness", 1, constants_exactness},
      {2, "metric oracle equivalence", 10, metric_oracles},
      {3, "integral inequality suite", 30, lemma_suite},
      {4, "integrator orders", 120, integrator_orders},
      {5, "Girsanov identities", 60, girsanov_identities},
      {6, "OT solver correctness", 120, ot_correctness},
      {7, "coupling domination", 0, coupling_domination},
      {8, "end-to-end inequality verification", 1200, end_to_end},
      {9, "reproducibility", 0, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0) o.require(secs < c.budget_seconds, fmt("%.2f s within ", secs) + fmt("%.0f s", c.budget_seconds));
    std::printf("[%s] criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
