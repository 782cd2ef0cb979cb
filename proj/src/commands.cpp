#include "dsa/commands.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace dsa {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Json estimate_json(const ProbEstimate& p, int trials) {
  Json j = to_json(p);
  j["trials"] = trials;
  return j;
}

}  // namespace

Json run_design(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Json report = report_header(cfg);
  report["command"] = "design";
  const Pattern p = cfg.target();
  const NoiseParams np = cfg.noise();
  const DesignOptions opts = cfg.design_options();
  Geometry g = cfg.geometry();

  if (cfg.n_min) {
    ElectrodeSearch es = optimize_electrodes(p, g, *cfg.n_min, np, opts);
    Json table = Json::array();
    for (const auto& [gaps, prob] : es.table) table.push_back(Json{{"gaps", gaps}, {"prob", prob}});
    report["electrodes"] = Json{{"N_min", *cfg.n_min},
                                {"candidates", es.table.size()},
                                {"best_gaps", es.gaps},
                                {"table", table}};
    g = Geometry(es.gaps, cfg.d0, cfg.particles);
  }

  Schedule best;
  Json table = Json::array();
  auto row = [&](const Schedule& c) {
    table.push_back(Json{{"sequence", c.sequence},
                         {"stages", c.stages.size()},
                         {"p_total", c.p_total},
                         {"p_total_std_err", c.p_total_std_err},
                         {"t_final", c.t_final()}});
  };
  if (cfg.sequence) {
    best = plan_schedule(p, g, np, *cfg.sequence, opts);
    row(best);
    report["best_sequence_index"] = 0;
  } else {
    SequenceSearch search = search_activation_sequences(p, g, np, opts);
    for (const auto& c : search.candidates) row(c);
    report["best_sequence_index"] = search.best_index;
    best = search.best();
  }
  report["sequence_table"] = table;
  report["schedule"] = to_json(best);
  Json stage_p = Json::array();
  for (const auto& st : best.stages) stage_p.push_back(st.p_stage.value);
  report["stage_probabilities"] = stage_p;
  report["p_static"] = best.p_static.value;
  report["p_total"] = best.p_total;
  report["switch_times"] = best.switch_times;
  report["epsilon"] = Json{{"target", cfg.epsilon}, {"achieved", 1.0 - best.p_total},
                           {"met", 1.0 - best.p_total <= cfg.epsilon}};
  report["timings"] = Json{{"design_s", seconds_since(t0)}};
  return report;
}

Json run_validate(const RunConfig& cfg, const Schedule& sched, int trials, const std::string& model) {
  if (trials < 100) throw ConfigError("trials", "must be at least 100");
  if (model != "continuous" && model != "discrete" && model != "both") {
    throw ConfigError("model", "must be continuous, discrete or both");
  }
  const auto t0 = std::chrono::steady_clock::now();
  Json report = report_header(cfg);
  report["command"] = "validate";
  report["schedule"] = to_json(sched);
  Json v;
  const SimOptions so = cfg.sim_options();
  ProbEstimate cont;
  ProbEstimate disc;
  if (model != "discrete") {
    cont = estimate_success(sched, sched.pattern, Model::Continuous, trials, sub_seed(cfg, SeedStream::Continuous), so);
    v["continuous"] = estimate_json(cont, trials);
    v["continuous"]["product_formula"] = sched.p_total;
  }
  if (model != "continuous") {
    const DiscreteStateSpace ss(sched.geometry, so.state_cap);
    const DiscreteProduct dp = discrete_product(sched, ss);
    const Retimed rt = retime_discrete(sched, ss, cfg.discrete_max_duration);
    disc = estimate_success(rt.schedule, sched.pattern, Model::Discrete, trials, sub_seed(cfg, SeedStream::Discrete), so);
    v["discrete"] = estimate_json(disc, trials);
    v["discrete"]["product_formula"] = Json{{"stages", dp.stages}, {"static", dp.p_static}, {"total", dp.total}};
    v["discrete"]["retimed_switch_times"] = rt.schedule.switch_times;
    v["discrete"]["settling"] = rt.settling;
    v["discrete"]["capped"] = rt.capped;
  }
  if (model == "both") {
    v["gap"] = std::abs(cont.value - disc.value);
    v["gap_std_err"] = std::hypot(cont.std_err, disc.std_err);
  }
  report["validation"] = v;
  report["timings"] = Json{{"validate_s", seconds_since(t0)}};
  return report;
}

Trajectory run_simulate(const RunConfig& cfg, const Schedule& sched, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  const State x0 = uniform_initial_state(sched.geometry, rng, cfg.min_gap);
  return simulate_sde(x0, sched, NoiseParams(sched.sigma), cfg.dt, seed);
}

SweepResult run_sweep(const RunConfig& cfg, const Json& sweep) {
  if (!sweep.is_object()) throw ConfigError("sweep", "expected an object");
  for (const auto& [k, val] : sweep.items()) {
    if (k != "sigma" && k != "N_min") throw ConfigError("sweep." + k, "unknown field");
  }
  auto list = [&](const char* key) -> std::optional<std::vector<double>> {
    if (!sweep.contains(key)) return std::nullopt;
    const Json& a = sweep[key];
    if (!a.is_array()) throw ConfigError(std::string("sweep.") + key, "expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number()) throw ConfigError("sweep." + std::string(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(a[i].get<double>());
    }
    return out;
  };
  const auto sigmas = list("sigma");
  const auto nmins = list("N_min");

  SweepResult out;
  std::ostringstream csv;
  csv.precision(17);
  csv << "sigma,N_min,p_total,p_total_std_err\n";
  std::vector<RunConfig> points;
  if (sigmas || nmins) {
    const std::vector<double> s_vals = sigmas ? *sigmas : std::vector<double>{cfg.sigma};
    for (double s : s_vals) {
      if (nmins) {
        for (double m : *nmins) {
          RunConfig c = cfg;
          c.sigma = s;
          if (m != std::floor(m) || m < 1) throw ConfigError("sweep.N_min", "entries must be positive integers");
          c.n_min = static_cast<int>(m);
          points.push_back(c);
        }
      } else {
        RunConfig c = cfg;
        c.sigma = s;
        points.push_back(c);
      }
    }
  }
  for (RunConfig& c : points) {
    // revalidate each grid point through the parser
    c = parse_config(to_json(c));
    Json r = run_design(c);
    if (r.contains("electrodes")) out.electrode_candidates += r["electrodes"]["candidates"].get<int>();
    csv << c.sigma << ',' << (c.n_min ? std::to_string(*c.n_min) : "") << ',' << r["p_total"].get<double>() << ','
        << r["schedule"]["p_total_std_err"].get<double>() << '\n';
    out.reports.push_back(std::move(r));
  }
  out.csv = csv.str();
  return out;
}

}  // namespace dsa
