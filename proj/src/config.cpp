#include "nfsde/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "nfsde/errors.hpp"
#include "nfsde/rng.hpp"

namespace nfsde {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string ExperimentConfig::hash() const {
  // Execution knobs do not change any result, so they stay out of the identity.
  json identity = raw;
  identity.erase("threads");
  identity.erase("output");
  return hex64(fnv1a64(identity.dump()));
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError(assignment, "override must look like key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError(key, "empty path component");
    if (!node->is_object()) {
      if (!node->is_null()) throw ValidationError(key, "path runs through a non-object value");
      *node = json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

namespace {

// Typed field access with the dotted field name in every error.
class Block {
 public:
  Block(const json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      node_ = root.at(name_);
      if (!node_.is_object()) throw ValidationError(name_, "must be an object");
    } else {
      node_ = json::object();
    }
  }

  std::string field(const std::string& key) const { return name_ + "." + key; }
  bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number()) throw ValidationError(field(key), "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(field(key), "must be finite");
    return x;
  }
  std::optional<double> optional_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return number(key, 0.0);
  }
  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_integer()) throw ValidationError(field(key), "must be an integer");
    return v.get<int>();
  }
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ValidationError(field(key), "must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!node_.at(key).is_boolean()) throw ValidationError(field(key), "must be true or false");
    return node_.at(key).get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!node_.at(key).is_string()) throw ValidationError(field(key), "must be a string");
    return node_.at(key).get<std::string>();
  }
  std::vector<double> numbers(const std::string& key) const {
    if (!has(key)) return {};
    const json& v = node_.at(key);
    if (!v.is_array()) throw ValidationError(field(key), "must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ValidationError(field(key), "must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  Vector vector(const std::string& key, int dim, double fill) const {
    if (!has(key)) return Vector::Constant(dim, fill);
    const json& v = node_.at(key);
    if (v.is_number()) return Vector::Constant(dim, v.get<double>());
    const auto xs = numbers(key);
    if (static_cast<int>(xs.size()) != dim) throw ValidationError(field(key), "needs " + std::to_string(dim) + " entries");
    return Eigen::Map<const Vector>(xs.data(), dim);
  }
  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : node_.items()) {
      if (!ok.count(k)) throw ValidationError(field(k), "unknown key");
    }
  }

 private:
  std::string name_;
  json node_;
};

CoefficientSet build_model(const Block& m, int n_tau, int& dim, int& noise_dim) {
  m.allow({"preset", "k", "c1", "c3", "lambda1_weights", "lambda2_weights", "sigma_cap", "dim", "scale", "a", "c",
           "s", "multiplicative", "kappa", "A", "declared"});
  const std::string preset = m.string("preset", "linear");
  CoefficientSet c;
  try {
    if (preset == "linear") {
      LinearExample ex;
      ex.k = m.number("k", ex.k);
      ex.c1 = m.number("c1", ex.c1);
      ex.c3 = m.number("c3", ex.c3);
      ex.lambda1_weights = m.numbers("lambda1_weights");
      ex.lambda2_weights = m.numbers("lambda2_weights");
      ex.sigma_cap = m.optional_number("sigma_cap");
      ex.dim = m.integer("dim", 1);
      if (!(ex.k > 0.0 && ex.k < 1.0)) throw ValidationError(m.field("k"), "(B1) requires k in (0, 1)");
      c = linear_coefficients(ex, n_tau);
    } else if (preset == "zero") {
      const int d = m.integer("dim", 1);
      if (d < 1) throw ValidationError(m.field("dim"), "must be >= 1");
      c = zero_coefficients(d, d);
    } else if (preset == "brownian") {
      const int d = m.integer("dim", 1);
      if (d < 1) throw ValidationError(m.field("dim"), "must be >= 1");
      c = brownian_coefficients(d, m.number("scale", 1.0));
    } else if (preset == "linear_delay") {
      c = linear_delay_coefficients(m.number("a", 1.0), m.number("c", 0.5), m.number("s", 0.3),
                                    m.boolean("multiplicative", false));
    } else if (preset == "delayed_neutral") {
      const double kappa = m.number("kappa", 0.5);
      if (!(kappa >= 0.0 && kappa < 1.0)) throw ValidationError(m.field("kappa"), "(A1) requires kappa in [0, 1)");
      const int d = m.integer("dim", 1);
      if (d < 1) throw ValidationError(m.field("dim"), "must be >= 1");
      c = delayed_neutral_coefficients(d, kappa, m.number("s", 1.0));
    } else {
      throw ValidationError(m.field("preset"), "unknown preset '" + preset + "'");
    }
  } catch (const DomainError& e) {
    throw ValidationError("model", e.what());
  }
  if (m.has("A")) c = with_stiff_drift(std::move(c), m.vector("A", c.dim, 0.0));
  dim = c.dim;
  noise_dim = c.noise_dim;
  return c;
}

void apply_declared(const json& root, CoefficientSet& c) {
  if (!root.contains("model") || !root.at("model").contains("declared")) return;
  const json wrapper = {{"model.declared", root.at("model").at("declared")}};
  const Block d(wrapper, "model.declared");
  d.allow({"kappa", "lambda1", "lambda2", "lambda3", "k", "k1", "k2", "delay_weights"});
  auto set = [&d](const char* key, std::optional<double>& slot) {
    if (d.has(key)) slot = d.number(key, 0.0);
  };
  set("kappa", c.declared.kappa);
  set("lambda1", c.declared.lambda1);
  set("lambda2", c.declared.lambda2);
  set("lambda3", c.declared.lambda3);
  set("k", c.declared.k);
  set("k1", c.declared.k1);
  set("k2", c.declared.k2);
  if (d.has("delay_weights")) c.declared.delay_weights = d.numbers("delay_weights");
}

}  // namespace

ExperimentConfig parse_config(const json& raw) {
  if (!raw.is_object()) throw ValidationError("config", "must be a JSON object");
  for (const auto& [k, v] : raw.items()) {
    static const std::set<std::string> blocks{"model", "initial", "sim", "tilt", "inequality", "convergence",
                                              "output", "threads"};
    if (!blocks.count(k)) throw ValidationError(k, "unknown block");
  }
  ExperimentConfig cfg;
  cfg.raw = raw;

  const Block sim(raw, "sim");
  sim.allow({"T", "dt", "tau", "d", "m", "n_paths", "seed", "fp_tol", "fp_max_iter"});
  SimConfig& s = cfg.sim;
  s.T = sim.number("T", 1.0);
  s.dt = sim.number("dt", 1.0 / 64);
  s.tau = sim.number("tau", 0.25);
  s.n_paths = sim.integer("n_paths", 64);
  s.seed = sim.u64("seed", 1);
  s.fp_tol = sim.number("fp_tol", 1e-12);
  s.fp_max_iter = sim.integer("fp_max_iter", 100);
  if (raw.contains("threads")) {
    if (!raw.at("threads").is_number_integer() || raw.at("threads").get<int>() < 0) {
      throw ValidationError("threads", "must be a nonnegative integer");
    }
    s.threads = raw.at("threads").get<int>();
  }
  if (!(s.dt > 0.0)) throw ValidationError("sim.dt", "must be positive");
  if (!(s.tau > 0.0)) throw ValidationError("sim.tau", "must be positive");
  int n_tau = 0;
  try {
    n_tau = s.n_tau();
  } catch (const DomainError&) {
    throw ValidationError("sim.tau", "must be an integer multiple of dt");
  }

  const Block model(raw, "model");
  int dim = 1, noise_dim = 1;
  cfg.coeffs = build_model(model, n_tau, dim, noise_dim);
  apply_declared(raw, cfg.coeffs);
  s.dim = sim.integer("d", dim);
  s.noise_dim = sim.integer("m", noise_dim);
  s.validate(cfg.coeffs.declared.kappa, &cfg.coeffs);
  try {
    cfg.coeffs.validate(n_tau);
  } catch (const DomainError& e) {
    throw ValidationError("model.declared", e.what());
  }

  const Block init(raw, "initial");
  init.allow({"kind", "value", "scale", "mean", "seed"});
  const std::string ikind = init.string("kind", "constant");
  if (ikind == "constant") {
    cfg.initial = InitialLaw::point(Segment::constant(s.dt, s.tau, init.vector("value", dim, 0.0)));
  } else if (ikind == "random") {
    const double scale = init.number("scale", 1.0);
    if (!(scale > 0.0)) throw ValidationError(init.field("scale"), "must be positive");
    const std::uint64_t iseed = init.u64("seed", derive_seed(s.seed, StreamPurpose::initial_law, 0));
    cfg.initial = InitialLaw::random(SegmentSampler(s.dt, s.tau, dim, scale), iseed, init.vector("mean", dim, 0.0));
  } else {
    throw ValidationError(init.field("kind"), "must be 'constant' or 'random'");
  }

  const Block tilt(raw, "tilt");
  tilt.allow({"kind", "h", "c", "h_bound"});
  const std::string tkind = tilt.string("kind", "zero");
  if (tkind == "zero") {
    cfg.tilt = GirsanovTilt::zero(noise_dim);
  } else if (tkind == "constant") {
    const Vector h = tilt.vector("h", noise_dim, 0.0);
    const double bound = tilt.number("h_bound", h.norm());
    if (!(bound >= 0.0)) throw ValidationError(tilt.field("h_bound"), "must be nonnegative");
    cfg.tilt = GirsanovTilt::constant(h, bound);
  } else if (tkind == "feedback_tanh") {
    if (noise_dim != dim) throw ValidationError(tilt.field("kind"), "tanh feedback needs m == d");
    const Vector c = tilt.vector("c", noise_dim, 0.5);
    const double bound = tilt.number("h_bound", c.norm());
    if (!(bound >= 0.0)) throw ValidationError(tilt.field("h_bound"), "must be nonnegative");
    cfg.tilt = GirsanovTilt::feedback_tanh(c, bound);
  } else {
    throw ValidationError(tilt.field("kind"), "must be 'zero', 'constant' or 'feedback_tanh'");
  }

  const Block ineq(raw, "inequality");
  ineq.allow({"id", "lambda", "solver", "epsilon_rel", "bootstrap", "ci_level", "alpha_exponent_variant",
              "checker_pairs", "sampler_scale"});
  InequalityExperiment& e = cfg.inequality;
  e.id = inequality_from_string(ineq.string("id", "uniform-thm21"));
  e.lambda = ineq.number("lambda", 0.0);
  if (!(e.lambda >= 0.0)) throw ValidationError(ineq.field("lambda"), "must be nonnegative");
  const std::string solver = ineq.string("solver", "exact");
  if (solver == "exact") {
    e.solver = OtSolver::exact;
  } else if (solver == "sinkhorn") {
    e.solver = OtSolver::sinkhorn;
  } else {
    throw ValidationError(ineq.field("solver"), "must be 'exact' or 'sinkhorn'");
  }
  e.sinkhorn_rel_eps = ineq.number("epsilon_rel", 0.01);
  if (!(e.sinkhorn_rel_eps > 0.0)) throw ValidationError(ineq.field("epsilon_rel"), "must be positive");
  e.bootstrap = ineq.integer("bootstrap", 200);
  if (e.bootstrap < 1) throw ValidationError(ineq.field("bootstrap"), "must be >= 1");
  e.ci_level = ineq.number("ci_level", 0.95);
  if (!(e.ci_level > 0.0 && e.ci_level < 1.0)) throw ValidationError(ineq.field("ci_level"), "must lie in (0, 1)");
  const std::string variant = ineq.string("alpha_exponent_variant", "derivation");
  if (variant == "derivation") {
    e.alpha_variant = AlphaVariant::derivation;
  } else if (variant == "display") {
    e.alpha_variant = AlphaVariant::display;
  } else {
    throw ValidationError(ineq.field("alpha_exponent_variant"), "must be 'derivation' or 'display'");
  }
  const int pairs = ineq.integer("checker_pairs", 2000);
  if (pairs < 2) throw ValidationError(ineq.field("checker_pairs"), "must be >= 2");
  e.checker_pairs = static_cast<std::size_t>(pairs);
  e.sampler_scale = ineq.number("sampler_scale", 1.0);
  if (!(e.sampler_scale > 0.0)) throw ValidationError(ineq.field("sampler_scale"), "must be positive");
  e.coeffs = cfg.coeffs;
  e.initial = cfg.initial;
  e.sim = s;
  e.tilt = cfg.tilt;

  const Block conv(raw, "convergence");
  conv.allow({"dts", "refinement", "n_paths"});
  if (conv.has("dts")) cfg.convergence.dts = conv.numbers("dts");
  if (cfg.convergence.dts.size() < 2) throw ValidationError(conv.field("dts"), "needs at least two step sizes");
  for (double dt : cfg.convergence.dts) {
    if (!(dt > 0.0)) throw ValidationError(conv.field("dts"), "step sizes must be positive");
  }
  cfg.convergence.refinement = conv.integer("refinement", 64);
  if (cfg.convergence.refinement < 1) throw ValidationError(conv.field("refinement"), "must be >= 1");
  cfg.convergence.n_paths = conv.integer("n_paths", 2000);
  if (cfg.convergence.n_paths < 1) throw ValidationError(conv.field("n_paths"), "must be >= 1");

  const Block out(raw, "output");
  out.allow({"dir", "formats", "per_path_csv"});
  cfg.output.dir = out.string("dir", "out");
  if (out.has("formats")) {
    const json& f = raw.at("output").at("formats");
    if (!f.is_array()) throw ValidationError(out.field("formats"), "must be an array of 'json' / 'csv'");
    cfg.output.json = cfg.output.csv = false;
    for (const auto& x : f) {
      const std::string v = x.is_string() ? x.get<std::string>() : "";
      if (v == "json") {
        cfg.output.json = true;
      } else if (v == "csv") {
        cfg.output.csv = true;
      } else {
        throw ValidationError(out.field("formats"), "entries must be 'json' or 'csv'");
      }
    }
  }
  cfg.output.per_path_csv = out.boolean("per_path_csv", false);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open '" + path + "'");
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config", std::string("not valid JSON: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(raw, o);
  return parse_config(raw);
}

}  // namespace nfsde
