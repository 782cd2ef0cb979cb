#include <cmath>
#include <random>

#include "doctest.h"
#include "dsa/commands.hpp"
#include "dsa/io.hpp"
#include "helpers.hpp"

using namespace dsa;

namespace {

// 12 cells, three intervals, cheap optimizer
RunConfig small_config() {
  RunConfig c;
  c.cells = 12;
  c.gaps = {4, 4, 4};
  c.particles = 4;
  c.pattern = "011000100100";
  c.restarts = 1;
  c.objective_samples = 2048;
  c.final_samples = 4096;
  c.max_evaluations = 200;
  c.trials = 100;
  return c;
}

RunConfig example_config() {
  RunConfig c;
  c.sequence = ActivationSequence{{2}, {1, 3}};
  return c;
}

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("config: defaults describe the worked example") {
  const RunConfig c;
  CHECK(c.cells == 16);
  CHECK(c.particles == 8);
  CHECK(c.gaps == std::vector<int>{4, 4, 4, 4});
  CHECK(c.sigma == 0.45);
  CHECK(c.pattern == "0111001100100101");
  CHECK(c.geometry() == test::example_geometry());
}

TEST_CASE("config: serialize then parse is the identity") {
  dsa::Rng rng(1);
  std::uniform_real_distribution<double> U(0.01, 2.0);
  std::uniform_int_distribution<int> I(1, 50);
  for (int t = 0; t < 100; ++t) {
    RunConfig c;
    c.sigma = U(rng);
    c.epsilon = U(rng) / 4;
    c.restarts = I(rng);
    c.u_max = 10 + U(rng);
    c.u_min = U(rng) / 100;
    c.objective_samples = 1000 + I(rng);
    c.max_evaluations = 100 + I(rng);
    c.saturation = 0.5 + U(rng) / 4;
    c.warm_start = t % 2 == 0;
    c.dt = U(rng) / 100;
    c.trials = 100 + I(rng);
    c.min_gap = U(rng) / 10;
    c.seed = rng();
    c.model = t % 3 == 0 ? "continuous" : t % 3 == 1 ? "discrete" : "both";
    if (t % 4 == 0) c.sequence = ActivationSequence{{3}, {1, 2}};
    if (t % 5 == 0) c.n_min = 3;
    const RunConfig back = parse_config(to_json(c));
    CHECK(back == c);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(parse_config_text(to_json(c).dump(2)) == c);
  }
}

TEST_CASE("config: hash follows the content") {
  RunConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("config: sub-seeds are distinct and follow the documented rule") {
  RunConfig c;
  c.seed = 99;
  CHECK(sub_seed(c, SeedStream::Design) == derive_seed(99, 1));
  CHECK(sub_seed(c, SeedStream::Simulate) == derive_seed(99, 4));
  CHECK(sub_seed(c, SeedStream::Continuous) != sub_seed(c, SeedStream::Discrete));
  CHECK(c.design_options().seed == sub_seed(c, SeedStream::Design));
}

TEST_CASE("config: field-level diagnostics") {
  Json j = to_json(RunConfig{});
  j["pattern"] = "0110";
  CHECK(field_of([&] { parse_config(j); }) == "pattern");

  j = to_json(RunConfig{});
  j["geometry"]["gaps"] = Json::array({4, 4, 4, 5});
  CHECK(field_of([&] { parse_config(j); }) == "geometry.gaps");

  j = to_json(RunConfig{});
  j["optimizer"]["restarts"] = "many";
  CHECK(field_of([&] { parse_config(j); }) == "optimizer.restarts");

  j = to_json(RunConfig{});
  j["simulation"]["colour"] = 1;
  CHECK(field_of([&] { parse_config(j); }) == "simulation.colour");

  j = to_json(RunConfig{});
  j["sigma"] = -1.0;
  CHECK(field_of([&] { parse_config(j); }) == "sigma");

  j = to_json(RunConfig{});
  j["sequence"] = Json::array({Json::array({1, 2})});
  CHECK(field_of([&] { parse_config(j); }) == "sequence");

  j = to_json(RunConfig{});
  j["model"] = "quantum";
  CHECK(field_of([&] { parse_config(j); }) == "model");
}

TEST_CASE("config: syntax errors carry the line and column") {
  try {
    parse_config_text("{\n  \"sigma\": 0.45,\n  \"pattern\": ,\n}");
    FAIL("no error");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(what.find("column") != std::string::npos);
  }
}

TEST_CASE("schedule: JSON round trip and geometry checks") {
  const Json j = read_json_file(DSA_TEST_DATA "/example_schedule.json");
  const Schedule s = schedule_from_json(j);
  CHECK(to_json(s) == j);
  CHECK(s.stages.size() == 2);
  CHECK(s.switch_times.size() == 3);

  const std::string path = DSA_TEST_DATA "/example_schedule.json";
  CHECK_NOTHROW(load_schedule(path, RunConfig{}));
  RunConfig other = small_config();
  CHECK(field_of([&] { load_schedule(path, other); }) == "schedule.geometry");
  RunConfig pat;
  pat.pattern = "1111000011110000";
  CHECK(field_of([&] { load_schedule(path, pat); }) == "schedule.pattern");
  CHECK(field_of([&] { load_schedule("/nonexistent/schedule.json", RunConfig{}); }) != "<no error>");
}

TEST_CASE("run_design: invalid pattern length") {
  Json j = to_json(RunConfig{});
  j["pattern"] = "011100110010010";
  CHECK(field_of([&] { run_design(parse_config(j)); }) == "pattern");
}

TEST_CASE("run_design: one-stage override and reproducibility from the echoed config") {
  RunConfig c = small_config();
  c.sequence = ActivationSequence{{1, 2}};
  const Json a = run_design(c);
  CHECK(a["schedule"]["stages"].size() == 1);
  CHECK(a["sequence_table"].size() == 1);
  CHECK(a["tool"] == "dsa");
  CHECK(a["config_hash"] == config_hash(c));
  const Json b = run_design(parse_config(a["config"]));
  CHECK(b["schedule"] == a["schedule"]);
  CHECK(b["seeds"] == a["seeds"]);
}

TEST_CASE("run_design: full search on a small instance") {
  const Json r = run_design(small_config());
  CHECK(r["sequence_table"].size() == 3);
  const double best = r["p_total"].get<double>();
  CHECK(best == r["schedule"]["p_total"].get<double>());
  CHECK(r["epsilon"]["achieved"].get<double>() == doctest::Approx(1.0 - best));
}

TEST_CASE("run_validate: trials below the minimum are rejected") {
  RunConfig c = small_config();
  c.sequence = ActivationSequence{{1, 2}};
  const Schedule s = schedule_from_json(run_design(c)["schedule"]);
  CHECK(field_of([&] { run_validate(c, s, 0, "continuous"); }) == "trials");
  CHECK(field_of([&] { run_validate(c, s, 200, "magic"); }) == "model");
}

TEST_CASE("run_validate: both models give two estimates and their gap") {
  RunConfig c = small_config();
  c.sequence = ActivationSequence{{1, 2}};
  const Schedule s = schedule_from_json(run_design(c)["schedule"]);
  const Json r = run_validate(c, s, 200, "both");
  const Json& v = r["validation"];
  REQUIRE(v.contains("continuous"));
  REQUIRE(v.contains("discrete"));
  CHECK(v["gap"].get<double>() ==
        doctest::Approx(std::abs(v["continuous"]["value"].get<double>() - v["discrete"]["value"].get<double>())));
  CHECK(v["continuous"]["trials"] == 200);
}

TEST_CASE("run_sweep: empty grids") {
  const RunConfig c = small_config();
  CHECK(run_sweep(c, Json::object()).reports.empty());
  CHECK(run_sweep(c, Json{{"sigma", Json::array()}}).reports.empty());
  CHECK(run_sweep(c, Json{{"sigma", Json::array()}}).csv == "sigma,N_min,p_total,p_total_std_err\n");
  CHECK(field_of([&] { run_sweep(c, Json{{"temperature", Json::array()}}); }) == "sweep.temperature");
}

TEST_CASE("run_sweep: N_min grid on the example geometry") {
  RunConfig c;
  c.sequence = ActivationSequence{{1, 2, 3}};
  c.restarts = 1;
  c.objective_samples = 1024;
  c.final_samples = 2048;
  c.max_evaluations = 60;
  c.warm_start = false;
  const SweepResult r = run_sweep(c, Json{{"N_min", Json::array({3, 4})}});
  CHECK(r.reports.size() == 2);
  CHECK(r.electrode_candidates == 36);
}

TEST_CASE("run_sweep: p_total does not rise with sigma on the example") {
  const SweepResult r = run_sweep(example_config(), Json{{"sigma", Json::array({0.1, 0.2, 0.45})}});
  REQUIRE(r.reports.size() == 3);
  for (std::size_t i = 1; i < 3; ++i) {
    const double p0 = r.reports[i - 1]["p_total"].get<double>();
    const double p1 = r.reports[i]["p_total"].get<double>();
    const double se = std::hypot(r.reports[i - 1]["schedule"]["p_total_std_err"].get<double>(),
                                 r.reports[i]["schedule"]["p_total_std_err"].get<double>());
    MESSAGE("p_total " << p0 << " -> " << p1);
    CHECK(p1 <= p0 + 2 * se);
  }
}
