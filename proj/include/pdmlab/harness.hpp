#pragma once

// Experiment drivers shared by the CLI and the acceptance suite: run the
// static and dynamic tuners plus the oracle over a workload and assemble
// per-phase comparisons.

#include <algorithm>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdmlab/cache_model.hpp"
#include "pdmlab/dynapdm.hpp"
#include "pdmlab/energy_model.hpp"
#include "pdmlab/oracle.hpp"
#include "pdmlab/pdm_static.hpp"
#include "pdmlab/trace_io.hpp"

namespace pdmlab {

// Distinct phase traces plus the order they execute in.
struct Workload {
  std::vector<PhaseTrace> phases;
  std::vector<std::string> schedule;

  const PhaseTrace& phase(const std::string& id) const {
    for (const auto& p : phases) {
      if (p.phase_id == id) return p;
    }
    throw Error("workload has no phase '" + id + "'");
  }

  std::vector<std::string> distinct_schedule() const {
    std::vector<std::string> out;
    for (const auto& id : schedule) {
      if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    }
    return out;
  }

  // Same phases with the schedule rotated so `head` runs first.
  Workload with_head(const std::string& head) const {
    auto it = std::find(schedule.begin(), schedule.end(), head);
    if (it == schedule.end()) throw Error("schedule has no phase '" + head + "'");
    Workload w = *this;
    std::rotate(w.schedule.begin(), w.schedule.begin() + (it - schedule.begin()), w.schedule.end());
    return w;
  }
};

inline Workload load_workload(const std::filesystem::path& manifest) {
  const WorkloadSchedule sched = parse_workload(manifest);
  Workload w;
  w.schedule = sched.schedule;
  for (const auto& id : sched.distinct_phases()) {
    PhaseTrace t = parse_trace(sched.traces.at(id));
    t.phase_id = id;
    w.phases.push_back(std::move(t));
  }
  return w;
}

inline Workload generate_workload(const SuiteSpec& suite) {
  Workload w;
  w.schedule = suite.schedule;
  for (const auto& spec : suite.phases) w.phases.push_back(generate_synthetic(spec));
  return w;
}

struct RunOptions {
  TunerOptions tuner;
  Thresholds thresholds;
  bool run_pdm = true;
};

struct PhaseReport {
  std::string phase_id;
  std::size_t executions = 0;
  double base_edp = 0.0;
  double pdm_edp = 0.0;
  double dynapdm_edp = 0.0;
  double oracle_edp = 0.0;
  ConfigPair pdm_pair;
  ConfigPair dynapdm_pair;
  ConfigPair oracle_pair;
  // Tuning-interval EDPs seen by the tuner (base pair and recorded pair).
  double base_interval_edp = 0.0;
  double dynapdm_interval_edp = 0.0;
  std::size_t explored = 0;
  std::size_t explored_icache = 0;
  std::size_t explored_dcache = 0;
  std::uint64_t interval_accesses = 0;
  PhaseDistance d_instruction = 0.0;
  PhaseDistance d_data = 0.0;

  double savings(double edp) const { return 1.0 - edp / base_edp; }
  double pdm_savings() const { return savings(pdm_edp); }
  double dynapdm_savings() const { return savings(dynapdm_edp); }
  double oracle_savings() const { return savings(oracle_edp); }
  double dynapdm_gap() const { return gap(dynapdm_edp, oracle_edp); }
};

struct RunReport {
  std::string mode;
  std::string base_phase;
  std::vector<PhaseReport> phases;
  std::size_t window_count = 0;
  double final_window_size = 0.0;

  double mean(double (PhaseReport::*fn)() const) const {
    if (phases.empty()) return 0.0;
    double s = 0.0;
    for (const auto& p : phases) s += (p.*fn)();
    return s / static_cast<double>(phases.size());
  }

  double mean_field(double PhaseReport::*field) const {
    if (phases.empty()) return 0.0;
    double s = 0.0;
    for (const auto& p : phases) s += p.*field;
    return s / static_cast<double>(phases.size());
  }

  const PhaseReport& phase(const std::string& id) const {
    for (const auto& p : phases) {
      if (p.phase_id == id) return p;
    }
    throw Error("report has no phase '" + id + "'");
  }
};

struct RunResult {
  RunReport report;
  std::vector<IntervalRecord> log;
};

// Whole-phase per-configuration statistics, computed once per workload and
// shared by every experiment on it.
class ProfileCache {
 public:
  explicit ProfileCache(const Workload& w) {
    for (const auto& p : w.phases) profiles_.emplace(p.phase_id, profile_phase(p));
  }

  const PhaseProfile& operator[](const std::string& id) const {
    auto it = profiles_.find(id);
    if (it == profiles_.end()) throw Error("no profile for phase '" + id + "'");
    return it->second;
  }

 private:
  std::map<std::string, PhaseProfile> profiles_;
};

// Runs the dynamic tuner over the schedule. Known phases are monitored on
// each re-execution and re-tuned when their EDP drifts.
inline DynaPdmTuner run_dynapdm(const Workload& w, const EnergyParams& p, const TunerOptions& o,
                                std::map<std::string, PhaseOutcome>* first_outcomes = nullptr) {
  DynaPdmTuner tuner(p, o);
  for (const auto& id : w.schedule) {
    const PhaseTrace& trace = w.phase(id);
    const PhaseOutcome outcome = tuner.on_phase_enter(trace);
    if (outcome.history_hit) {
      tuner.monitor_and_retune(trace, tuner.measure_edp(trace, outcome.pair));
    } else if (first_outcomes && !first_outcomes->contains(id)) {
      first_outcomes->emplace(id, outcome);
    }
  }
  return tuner;
}

inline RunResult run_experiment(const Workload& w, const EnergyParams& p, const RunOptions& opt,
                                const ProfileCache& profiles) {
  RunResult result;
  RunReport& report = result.report;
  report.mode = opt.tuner.static_window_size ? "dynapdm-static-sd" : "dynapdm";
  if (w.schedule.empty()) return result;
  report.base_phase = w.schedule.front();

  std::map<std::string, PhaseOutcome> outcomes;
  const DynaPdmTuner tuner = run_dynapdm(w, p, opt.tuner, &outcomes);
  result.log = tuner.log();
  report.window_count = tuner.window_count();
  report.final_window_size = std::max(tuner.windows(Stream::Instruction).window_size(),
                                      tuner.windows(Stream::Data).window_size());

  BasePhaseInfo pdm_base;
  if (opt.run_pdm) {
    const PhaseTrace& head = w.phase(report.base_phase);
    pdm_base.best = exhaustive_search(profiles[head.phase_id], p).best;
    pdm_base.characteristics =
        characterize(head, opt.tuner.base_cfg, tuner.interval_for(head));
  }

  const ConfigPair base{opt.tuner.base_cfg, opt.tuner.base_cfg};
  for (const auto& id : w.distinct_schedule()) {
    const PhaseProfile& prof = profiles[id];
    const OracleResult oracle = exhaustive_search(prof, p);
    PhaseReport r;
    r.phase_id = id;
    r.executions = static_cast<std::size_t>(std::count(w.schedule.begin(), w.schedule.end(), id));
    r.base_edp = prof.cost_of(base, p).edp_Js;
    r.oracle_edp = oracle.best_edp;
    r.oracle_pair = oracle.best;

    const auto final_entry = tuner.history().lookup(id);
    r.dynapdm_pair = final_entry ? final_entry->best : outcomes.at(id).pair;
    r.dynapdm_edp = prof.cost_of(r.dynapdm_pair, p).edp_Js;
    r.dynapdm_interval_edp = final_entry ? final_entry->recorded_edp : outcomes.at(id).recorded_edp;
    const PhaseOutcome& first = outcomes.at(id);
    r.base_interval_edp = first.base_edp;
    r.interval_accesses = first.interval_accesses;
    r.d_instruction = first.d_instruction;
    r.d_data = first.d_data;
    for (const auto& rec : result.log) {
      if (rec.phase_id != id) continue;
      ++r.explored;
      if (rec.cache == "I") ++r.explored_icache;
      if (rec.cache == "D") ++r.explored_dcache;
    }

    if (opt.run_pdm) {
      const PdmResult pdm =
          pdm_tune(w.phase(id), pdm_base, opt.thresholds, tuner.interval_for(w.phase(id)),
                   opt.tuner.base_cfg);
      r.pdm_pair = pdm.pair;
      r.pdm_edp = prof.cost_of(pdm.pair, p).edp_Js;
    }
    report.phases.push_back(r);
  }
  return result;
}

inline RunResult run_experiment(const Workload& w, const EnergyParams& p, const RunOptions& opt) {
  return run_experiment(w, p, opt, ProfileCache(w));
}

struct SweepRow {
  double window_size = 0.0;
  std::size_t window_count = 0;
  double mean_savings = 0.0;
  double mean_gap = 0.0;
};

// Fixed (non-merging) window sizes, one full tuner run each.
inline std::vector<SweepRow> sweep_window_size(const Workload& w, const EnergyParams& p,
                                               const TunerOptions& base_options,
                                               const std::vector<double>& sizes,
                                               const ProfileCache& profiles) {
  std::vector<SweepRow> rows;
  for (double sd : sizes) {
    TunerOptions o = base_options;
    o.window_size = sd;
    o.static_window_size = true;
    RunOptions ro{o, Thresholds{}, false};
    const RunResult r = run_experiment(w, p, ro, profiles);
    rows.push_back({sd, r.report.window_count, r.report.mean(&PhaseReport::dynapdm_savings),
                    r.report.mean(&PhaseReport::dynapdm_gap)});
  }
  return rows;
}

// Which tuner columns a report carries.
struct ReportSections {
  bool pdm = false;
  bool dynapdm = true;
};

inline nlohmann::json to_json(const PhaseReport& r, ReportSections sections) {
  auto distance = [](PhaseDistance d) -> nlohmann::json {
    if (std::isinf(d)) return "inf";
    return d;
  };
  nlohmann::json j{
      {"phase_id", r.phase_id},
      {"executions", r.executions},
      {"base_edp", r.base_edp},
      {"oracle_edp", r.oracle_edp},
      {"oracle_config", pair_string(r.oracle_pair)},
      {"oracle_savings", r.oracle_savings()},
      {"d_instruction", distance(r.d_instruction)},
      {"d_data", distance(r.d_data)},
      {"interval_accesses", r.interval_accesses},
  };
  if (sections.dynapdm) {
    j["dynapdm_edp"] = r.dynapdm_edp;
    j["dynapdm_config"] = pair_string(r.dynapdm_pair);
    j["dynapdm_savings"] = r.dynapdm_savings();
    j["dynapdm_gap"] = r.dynapdm_gap();
    j["base_interval_edp"] = r.base_interval_edp;
    j["dynapdm_interval_edp"] = r.dynapdm_interval_edp;
    j["explored"] = r.explored;
    j["explored_icache"] = r.explored_icache;
    j["explored_dcache"] = r.explored_dcache;
  }
  if (sections.pdm) {
    j["pdm_edp"] = r.pdm_edp;
    j["pdm_config"] = pair_string(r.pdm_pair);
    j["pdm_savings"] = r.pdm_savings();
    j["pdm_gap"] = gap(r.pdm_edp, r.oracle_edp);
  }
  return j;
}

inline nlohmann::json to_json(const RunReport& r, ReportSections sections) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : r.phases) phases.push_back(to_json(p, sections));
  nlohmann::json agg{
      {"mean_base_edp", r.mean_field(&PhaseReport::base_edp)},
      {"mean_oracle_edp", r.mean_field(&PhaseReport::oracle_edp)},
      {"mean_oracle_savings", r.mean(&PhaseReport::oracle_savings)},
  };
  nlohmann::json j{{"base_phase", r.base_phase}};
  if (sections.dynapdm) {
    agg["mean_dynapdm_edp"] = r.mean_field(&PhaseReport::dynapdm_edp);
    agg["mean_dynapdm_savings"] = r.mean(&PhaseReport::dynapdm_savings);
    agg["mean_dynapdm_gap"] = r.mean(&PhaseReport::dynapdm_gap);
    j["window_count"] = r.window_count;
    j["final_window_size"] = r.final_window_size;
  }
  if (sections.pdm) {
    agg["mean_pdm_edp"] = r.mean_field(&PhaseReport::pdm_edp);
    agg["mean_pdm_savings"] = r.mean(&PhaseReport::pdm_savings);
  }
  j["mode"] = sections.pdm && sections.dynapdm ? "both" : sections.pdm ? "pdm" : r.mode;
  j["phases"] = phases;
  j["aggregate"] = agg;
  return j;
}

inline void write_report_csv(const RunReport& r, std::ostream& out) {
  const auto old = out.precision(17);
  out << "phase_id,base_edp,pdm_edp,dynapdm_edp,oracle_edp,pdm_savings,dynapdm_savings,"
         "oracle_savings,explored\n";
  for (const auto& p : r.phases) {
    out << p.phase_id << ',' << p.base_edp << ',' << p.pdm_edp << ',' << p.dynapdm_edp << ','
        << p.oracle_edp << ',' << p.pdm_savings() << ',' << p.dynapdm_savings() << ','
        << p.oracle_savings() << ',' << p.explored << '\n';
  }
  out.precision(old);
}

inline void write_log_jsonl(const std::vector<IntervalRecord>& log, std::ostream& out) {
  for (const auto& rec : log) out << to_json(rec).dump() << '\n';
}

}  // namespace pdmlab
