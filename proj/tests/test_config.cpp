#include <sstream>

#include "doctest.h"
#include "nfsde/commands.hpp"
#include "nfsde/config.hpp"
#include "nfsde/errors.hpp"

using namespace nfsde;
using nlohmann::json;

namespace {

std::string failing_field(const json& raw) {
  try {
    parse_config(raw);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("overrides create nested keys and parse JSON values") {
  json cfg = json::object();
  apply_override(cfg, "sim.n_paths=32");
  apply_override(cfg, "output.dir=results/run1");
  apply_override(cfg, "tilt.h=[0.5]");
  CHECK(cfg["sim"]["n_paths"] == 32);
  CHECK(cfg["output"]["dir"] == "results/run1");
  CHECK(cfg["tilt"]["h"].is_array());
  CHECK_THROWS_AS(apply_override(cfg, "novalue"), ValidationError);
}

TEST_CASE("validation names the offending field") {
  CHECK(failing_field(json::parse(R"({"sim": {"dt": -1}})")) == "sim.dt");
  CHECK(failing_field(json::parse(R"({"sim": {"tau": 0.3, "dt": 0.125}})")) == "sim.tau");
  CHECK(failing_field(json::parse(R"({"sim": {"n_paths": 0}})")) == "sim.n_paths");
  CHECK(failing_field(json::parse(R"({"model": {"preset": "linear", "k": 1.5}})")) == "model.k");
  CHECK(failing_field(json::parse(R"({"model": {"preset": "delayed_neutral", "kappa": 1.0}})")) == "model.kappa");
  CHECK(failing_field(json::parse(R"({"model": {"preset": "nope"}})")) == "model.preset");
  CHECK(failing_field(json::parse(R"({"sim": {"bogus": 1}})")) == "sim.bogus");
  CHECK(failing_field(json::parse(R"({"inequality": {"solver": "lp"}})")) == "inequality.solver");
  CHECK(failing_field(json::parse(R"({"model": {"preset": "brownian", "A": [-200]}})")) == "model.A");
  CHECK(failing_field(json::parse(R"({"extra": {}})")) == "extra");
}

TEST_CASE("defaults parse and the hash follows the content") {
  const auto a = parse_config(json::object());
  CHECK(a.sim.n_paths == 64);
  CHECK(a.coeffs.declared.k);
  json raw = json::object();
  apply_override(raw, "sim.seed=5");
  const auto b = parse_config(raw);
  CHECK(a.hash() != b.hash());
  CHECK(b.hash() == parse_config(raw).hash());
  CHECK(b.hash().size() == 16u);
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("constants query") {
  ConstantsQuery q;
  q.T = 1;
  q.kappa = 0;
  q.l1 = 1;
  q.l2 = 0;
  q.l3 = 1;
  const auto row = evaluate_constants(q);
  CHECK(row["alpha"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(row["beta"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  q.kappa = 1.0;
  try {
    evaluate_constants(q);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("(A1)") != std::string::npos);
  }
  ConstantsQuery c;
  c.lambda = 0;
  c.k = 0;
  c.k1 = 2;
  c.k2 = 1;
  c.l3 = 1;
  CHECK(evaluate_constants(c)["c_lambda"].get<double>() == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("sweep rows carry their own errors") {
  ConstantsQuery q;
  q.T = 1;
  q.l1 = 1;
  std::ostringstream os;
  constants_sweep_csv(q, {parse_sweep("kappa=0:1:3")}, os);
  std::istringstream is(os.str());
  std::string line;
  int rows = 0, errors = 0;
  std::getline(is, line);
  while (std::getline(is, line)) {
    ++rows;
    if (line.find("(A1)") != std::string::npos) ++errors;
  }
  CHECK(rows == 3);
  CHECK(errors == 1);
  CHECK_THROWS_AS(parse_sweep("kappa=0:1"), ValidationError);
}

TEST_CASE("execution knobs stay out of the hash") {
  json a = json::parse(R"({"sim": {"seed": 3}, "threads": 1, "output": {"dir": "x"}})");
  json b = json::parse(R"({"sim": {"seed": 3}, "threads": 8, "output": {"dir": "y"}})");
  CHECK(parse_config(a).hash() == parse_config(b).hash());
}
