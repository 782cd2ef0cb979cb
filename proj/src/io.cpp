#include "dsa/io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dsa/random.hpp"

#ifndef DSA_VERSION
#define DSA_VERSION "0.0.0"
#endif

namespace dsa {

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void reject_unknown(const Json& obj, const std::string& path, std::initializer_list<const char*> known) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError(join(path, k), "unknown field");
  }
}

const Json& require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  return j;
}

template <typename T>
bool fetch(const Json& obj, const std::string& key, const std::string& path, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  const std::string field = join(path, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw ConfigError(field, "expected true or false");
    out = it->template get<bool>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!it->is_number_unsigned()) throw ConfigError(field, "expected a nonnegative integer");
    out = it->template get<std::uint64_t>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) throw ConfigError(field, "expected an integer");
    auto v = it->template get<long long>();
    if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) throw ConfigError(field, "out of range");
    out = static_cast<T>(v);
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!it->is_number()) throw ConfigError(field, "expected a number");
    out = it->template get<double>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!it->is_string()) throw ConfigError(field, "expected a string");
    out = it->template get<std::string>();
  }
  return true;
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

std::vector<int> int_array(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer()) throw ConfigError(field + "[" + std::to_string(i) + "]", "expected an integer");
    out.push_back(j[i].get<int>());
  }
  return out;
}

Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

Eigen::VectorXd json_vec(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field + "[" + std::to_string(i) + "]", "expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

const Json& member(const Json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(join(path, key), "missing");
  return *it;
}

ProbEstimate prob_from_json(const Json& j, const std::string& path) {
  ProbEstimate p;
  p.value = member(j, "value", path).get<double>();
  p.std_err = member(j, "std_err", path).get<double>();
  const std::string m = member(j, "method", path).get<std::string>();
  if (m == "exact-mc") {
    p.method = ProbMethod::ExactMC;
  } else if (m == "saddle-point") {
    p.method = ProbMethod::SaddlePoint;
  } else if (m == "simulation") {
    p.method = ProbMethod::Simulation;
  } else if (m == "discrete") {
    p.method = ProbMethod::Discrete;
  } else {
    throw ConfigError(join(path, "method"), "unknown method " + m);
  }
  return p;
}

Composition composition_from_json(const Json& j, const std::string& path) {
  return Composition{int_array(member(j, "counts", path), join(path, "counts")),
                     int_array(member(j, "active", path), join(path, "active"))};
}

Json diag_json(const OptimizerDiagnostics& d) {
  return Json{{"evaluations", d.evaluations},
              {"restarts", d.restarts_run},
              {"stalled_restarts", d.stalled_restarts},
              {"stalled", d.stalled()},
              {"objective", d.objective},
              {"restart_objectives", d.restart_objectives}};
}

OptimizerDiagnostics diag_from_json(const Json& j) {
  OptimizerDiagnostics d;
  if (!j.is_object()) return d;
  d.evaluations = j.value("evaluations", 0);
  d.restarts_run = j.value("restarts", 0);
  d.stalled_restarts = j.value("stalled_restarts", 0);
  d.objective = j.value("objective", 0.0);
  if (j.contains("restart_objectives")) d.restart_objectives = j["restart_objectives"].get<std::vector<double>>();
  return d;
}

Json geometry_json(const RunConfig& c) {
  return Json{{"N", c.cells}, {"d0", c.d0}, {"gaps", c.gaps}, {"n", c.particles}};
}

Json geometry_json(const Geometry& g) {
  return Json{{"N", g.cells()}, {"d0", g.cell_width()}, {"gaps", g.gaps()}, {"n", g.particles()}};
}

void validate_sequence(const ActivationSequence& seq, int intervals, const std::string& field) {
  std::set<int> seen;
  for (std::size_t b = 0; b < seq.size(); ++b) {
    const std::string bf = field + "[" + std::to_string(b) + "]";
    check(!seq[b].empty(), bf, "empty block");
    for (int e : seq[b]) {
      check(e > 0 && e < intervals, bf, "electrode " + std::to_string(e) + " is not interior");
      check(seen.insert(e).second, bf, "electrode " + std::to_string(e) + " appears twice");
    }
  }
  check(static_cast<int>(seen.size()) == intervals - 1, field, "must cover every interior electrode exactly once");
}

}  // namespace

Geometry RunConfig::geometry() const { return Geometry(gaps, d0, particles); }
Pattern RunConfig::target() const { return Pattern::parse(pattern); }
NoiseParams RunConfig::noise() const { return NoiseParams(sigma); }

DesignOptions RunConfig::design_options() const {
  DesignOptions o;
  o.u_max = u_max;
  o.u_min = u_min;
  o.restarts = restarts;
  o.warm_start = warm_start;
  o.objective_samples = objective_samples;
  o.final_samples = final_samples;
  o.max_evaluations = max_evaluations;
  o.saturation = saturation;
  o.max_interior = max_interior;
  o.seed = sub_seed(*this, SeedStream::Design);
  return o;
}

SimOptions RunConfig::sim_options() const {
  SimOptions o;
  o.dt = dt;
  o.min_gap = min_gap;
  o.state_cap = std::max(20, cells);
  return o;
}

std::uint64_t sub_seed(const RunConfig& cfg, SeedStream s) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(s));
}

RunConfig parse_config(const Json& j) {
  require_object(j, "");
  reject_unknown(j, "", {"geometry", "pattern", "sigma", "model", "epsilon", "optimizer", "simulation", "seed",
                         "sequence", "N_min"});
  RunConfig c;

  if (j.contains("geometry")) {
    const Json& gj = require_object(j["geometry"], "geometry");
    reject_unknown(gj, "geometry", {"N", "d0", "gaps", "n"});
    fetch(gj, "N", "geometry", c.cells);
    fetch(gj, "d0", "geometry", c.d0);
    fetch(gj, "n", "geometry", c.particles);
    if (gj.contains("gaps")) c.gaps = int_array(gj["gaps"], "geometry.gaps");
  }
  check(c.cells >= 2 && c.cells <= 63, "geometry.N", "must lie in [2, 63]");
  check(c.d0 > 0.0, "geometry.d0", "must be positive");
  check(!c.gaps.empty(), "geometry.gaps", "needs at least one interval");
  int sum = 0;
  for (std::size_t i = 0; i < c.gaps.size(); ++i) {
    check(c.gaps[i] > 0, "geometry.gaps[" + std::to_string(i) + "]", "must be positive");
    sum += c.gaps[i];
  }
  check(sum == c.cells, "geometry.gaps", "must sum to N = " + std::to_string(c.cells));
  check(c.particles >= 1 && c.particles < c.cells, "geometry.n", "must satisfy 0 < n < N");

  fetch(j, "pattern", "", c.pattern);
  check(static_cast<int>(c.pattern.size()) == c.cells, "pattern",
        "length " + std::to_string(c.pattern.size()) + " does not match N = " + std::to_string(c.cells));
  int ones = 0;
  for (char ch : c.pattern) {
    check(ch == '0' || ch == '1', "pattern", "only '0' and '1' are allowed");
    ones += ch == '1';
  }
  check(ones == c.particles, "pattern", "popcount " + std::to_string(ones) + " does not match n = " +
                                            std::to_string(c.particles));

  fetch(j, "sigma", "", c.sigma);
  check(c.sigma > 0.0, "sigma", "must be positive");
  fetch(j, "model", "", c.model);
  check(c.model == "continuous" || c.model == "discrete" || c.model == "both", "model",
        "must be continuous, discrete or both");
  fetch(j, "epsilon", "", c.epsilon);
  check(c.epsilon > 0.0 && c.epsilon < 1.0, "epsilon", "must lie in (0, 1)");

  if (j.contains("optimizer")) {
    const Json& o = require_object(j["optimizer"], "optimizer");
    reject_unknown(o, "optimizer", {"restarts", "u_max", "u_min", "objective_samples", "final_samples",
                                    "max_evaluations", "saturation", "warm_start", "max_interior"});
    fetch(o, "restarts", "optimizer", c.restarts);
    fetch(o, "u_max", "optimizer", c.u_max);
    fetch(o, "u_min", "optimizer", c.u_min);
    fetch(o, "objective_samples", "optimizer", c.objective_samples);
    fetch(o, "final_samples", "optimizer", c.final_samples);
    fetch(o, "max_evaluations", "optimizer", c.max_evaluations);
    fetch(o, "saturation", "optimizer", c.saturation);
    fetch(o, "warm_start", "optimizer", c.warm_start);
    fetch(o, "max_interior", "optimizer", c.max_interior);
  }
  check(c.restarts >= 1, "optimizer.restarts", "must be at least 1");
  check(c.u_min > 0.0, "optimizer.u_min", "must be positive");
  check(c.u_max > c.u_min, "optimizer.u_max", "must exceed u_min");
  check(c.objective_samples >= kBatches, "optimizer.objective_samples", "must be at least " + std::to_string(kBatches));
  check(c.final_samples >= 1000, "optimizer.final_samples", "must be at least 1000");
  check(c.max_evaluations >= 10, "optimizer.max_evaluations", "must be at least 10");
  check(c.saturation > 0.0 && c.saturation <= 1.0, "optimizer.saturation", "must lie in (0, 1]");
  check(c.max_interior >= 0, "optimizer.max_interior", "must be nonnegative");

  if (j.contains("simulation")) {
    const Json& s = require_object(j["simulation"], "simulation");
    reject_unknown(s, "simulation", {"dt", "trials", "min_gap", "discrete_max_duration"});
    fetch(s, "dt", "simulation", c.dt);
    fetch(s, "trials", "simulation", c.trials);
    fetch(s, "min_gap", "simulation", c.min_gap);
    fetch(s, "discrete_max_duration", "simulation", c.discrete_max_duration);
  }
  check(c.dt > 0.0 && c.dt <= 0.1, "simulation.dt", "must lie in (0, 0.1]");
  check(c.trials >= 100, "simulation.trials", "must be at least 100");
  check(c.min_gap >= 0.0 && c.min_gap < c.d0, "simulation.min_gap", "must lie in [0, d0)");
  check(c.discrete_max_duration > 0.0, "simulation.discrete_max_duration", "must be positive");

  fetch(j, "seed", "", c.seed);

  if (j.contains("sequence") && !j["sequence"].is_null()) {
    const Json& sj = j["sequence"];
    check(sj.is_array(), "sequence", "expected an array of electrode blocks");
    ActivationSequence seq;
    for (std::size_t b = 0; b < sj.size(); ++b) seq.push_back(int_array(sj[b], "sequence[" + std::to_string(b) + "]"));
    validate_sequence(seq, static_cast<int>(c.gaps.size()), "sequence");
    c.sequence = seq;
  }
  if (j.contains("N_min") && !j["N_min"].is_null()) {
    int v = 0;
    fetch(j, "N_min", "", v);
    check(v >= 1, "N_min", "must be positive");
    check(static_cast<int>(c.gaps.size()) * v <= c.cells, "N_min", "c * N_min exceeds N");
    c.n_min = v;
  }
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col), "JSON syntax error");
  }
  return parse_config(j);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

Json to_json(const RunConfig& c) {
  Json j;
  j["geometry"] = geometry_json(c);
  j["pattern"] = c.pattern;
  j["sigma"] = c.sigma;
  j["model"] = c.model;
  j["epsilon"] = c.epsilon;
  j["optimizer"] = Json{{"restarts", c.restarts},
                        {"u_max", c.u_max},
                        {"u_min", c.u_min},
                        {"objective_samples", c.objective_samples},
                        {"final_samples", c.final_samples},
                        {"max_evaluations", c.max_evaluations},
                        {"saturation", c.saturation},
                        {"warm_start", c.warm_start},
                        {"max_interior", c.max_interior}};
  j["simulation"] = Json{{"dt", c.dt},
                         {"trials", c.trials},
                         {"min_gap", c.min_gap},
                         {"discrete_max_duration", c.discrete_max_duration}};
  j["seed"] = c.seed;
  j["sequence"] = c.sequence ? Json(*c.sequence) : Json(nullptr);
  j["N_min"] = c.n_min ? Json(*c.n_min) : Json(nullptr);
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json to_json(const ProbEstimate& p) {
  return Json{{"value", p.value}, {"std_err", p.std_err}, {"method", to_string(p.method)}};
}

Json to_json(const Composition& nu) { return Json{{"counts", nu.counts}, {"active", nu.active}}; }

Json to_json(const Schedule& s) {
  Json j;
  j["geometry"] = geometry_json(s.geometry);
  j["pattern"] = s.pattern.str();
  j["sigma"] = s.sigma;
  j["sequence"] = s.sequence;
  Json stages = Json::array();
  for (const auto& st : s.stages) {
    stages.push_back(Json{{"active", st.active},
                          {"u", vec_json(st.u.u)},
                          {"from_nu", to_json(st.from_nu)},
                          {"target_nu", to_json(st.target_nu)},
                          {"x_eq", vec_json(st.x_eq)},
                          {"p_stage", to_json(st.p_stage)},
                          {"p_stage_saddle", to_json(st.p_stage_saddle)},
                          {"duration", st.duration},
                          {"diagnostics", diag_json(st.diag)}});
  }
  j["stages"] = stages;
  j["static"] = Json{{"u", vec_json(s.static_u.u)},
                     {"x_ss", vec_json(s.static_x_ss)},
                     {"prob", to_json(s.p_static)},
                     {"settling", s.static_settling}};
  j["switch_times"] = s.switch_times;
  j["p_total"] = s.p_total;
  j["p_total_std_err"] = s.p_total_std_err;
  return j;
}

Schedule schedule_from_json(const Json& j) {
  require_object(j, "schedule");
  Schedule s;
  const Json& gj = member(j, "geometry", "schedule");
  s.geometry = Geometry(int_array(member(gj, "gaps", "schedule.geometry"), "schedule.geometry.gaps"),
                        member(gj, "d0", "schedule.geometry").get<double>(),
                        member(gj, "n", "schedule.geometry").get<int>());
  s.pattern = Pattern::parse(member(j, "pattern", "schedule").get<std::string>());
  s.sigma = member(j, "sigma", "schedule").get<double>();
  for (const auto& b : member(j, "sequence", "schedule")) s.sequence.push_back(int_array(b, "schedule.sequence"));
  const Json& stages = member(j, "stages", "schedule");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string p = "schedule.stages[" + std::to_string(i) + "]";
    const Json& sj = stages[i];
    StagePlan st;
    st.active = int_array(member(sj, "active", p), p + ".active");
    st.u = ControlVector(json_vec(member(sj, "u", p), p + ".u"));
    st.from_nu = composition_from_json(member(sj, "from_nu", p), p + ".from_nu");
    st.target_nu = composition_from_json(member(sj, "target_nu", p), p + ".target_nu");
    st.x_eq = json_vec(member(sj, "x_eq", p), p + ".x_eq");
    st.p_stage = prob_from_json(member(sj, "p_stage", p), p + ".p_stage");
    if (sj.contains("p_stage_saddle")) st.p_stage_saddle = prob_from_json(sj["p_stage_saddle"], p + ".p_stage_saddle");
    st.duration = member(sj, "duration", p).get<double>();
    if (sj.contains("diagnostics")) st.diag = diag_from_json(sj["diagnostics"]);
    s.stages.push_back(st);
  }
  const Json& stj = member(j, "static", "schedule");
  s.static_u = ControlVector(json_vec(member(stj, "u", "schedule.static"), "schedule.static.u"));
  s.static_x_ss = json_vec(member(stj, "x_ss", "schedule.static"), "schedule.static.x_ss");
  s.p_static = prob_from_json(member(stj, "prob", "schedule.static"), "schedule.static.prob");
  s.static_settling = member(stj, "settling", "schedule.static").get<double>();
  s.switch_times = member(j, "switch_times", "schedule").get<std::vector<double>>();
  s.p_total = member(j, "p_total", "schedule").get<double>();
  s.p_total_std_err = j.value("p_total_std_err", 0.0);
  check(s.switch_times.size() == s.stages.size() + 1, "schedule.switch_times", "needs one entry per stage plus t_f");
  for (std::size_t i = 1; i < s.switch_times.size(); ++i) {
    check(s.switch_times[i] > s.switch_times[i - 1], "schedule.switch_times", "must be strictly increasing");
  }
  check(s.static_u.size() == s.geometry.electrodes(), "schedule.static.u", "wrong dimension");
  for (const auto& st : s.stages) {
    check(st.u.size() == s.geometry.electrodes(), "schedule.stages.u", "wrong dimension");
  }
  return s;
}

Schedule load_schedule(const std::string& path, const RunConfig& cfg) {
  Json j = read_json_file(path);
  if (j.is_object() && j.contains("schedule")) j = j["schedule"];
  Schedule s;
  try {
    s = schedule_from_json(j);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("schedule", std::string("malformed schedule: ") + e.what());
  }
  if (!(s.geometry == cfg.geometry())) throw ConfigError("schedule.geometry", "does not match the config geometry");
  if (s.pattern.str() != cfg.pattern) throw ConfigError("schedule.pattern", "does not match the config pattern");
  return s;
}

std::string tool_version() { return DSA_VERSION; }

Json report_header(const RunConfig& cfg) {
  Json j;
  j["tool"] = "dsa";
  j["version"] = tool_version();
  j["config_hash"] = config_hash(cfg);
  j["config"] = to_json(cfg);
  j["seeds"] = Json{{"seed", cfg.seed},
                    {"design", sub_seed(cfg, SeedStream::Design)},
                    {"continuous", sub_seed(cfg, SeedStream::Continuous)},
                    {"discrete", sub_seed(cfg, SeedStream::Discrete)},
                    {"simulate", sub_seed(cfg, SeedStream::Simulate)}};
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", path + ": JSON syntax error at byte " + std::to_string(e.byte));
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("", "cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace dsa
