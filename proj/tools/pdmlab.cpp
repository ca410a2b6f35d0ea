#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pdmlab/cache_model.hpp"
#include "pdmlab/dynapdm.hpp"
#include "pdmlab/energy_model.hpp"
#include "pdmlab/harness.hpp"
#include "pdmlab/oracle.hpp"
#include "pdmlab/pdm_static.hpp"
#include "pdmlab/trace_io.hpp"

namespace fs = std::filesystem;
using namespace pdmlab;

namespace {

// --params wins, then the environment, then the built-in table.
EnergyParams resolve_params(const std::string& flag) {
  if (!flag.empty()) return load_params(flag);
  if (const char* env = std::getenv(kParamsEnvVar); env && *env) return load_params(env);
  return EnergyParams{};
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Writes to `path`, or stdout when it is empty.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream out = open_out(path);
  fn(out);
}

void print_cost(const PhaseCost& c, const CacheStats& is, const CacheStats& ds) {
  nlohmann::json j{
      {"icache", {{"accesses", is.accesses}, {"misses", is.misses}, {"miss_rate", is.miss_rate()}}},
      {"dcache", {{"accesses", ds.accesses}, {"misses", ds.misses}, {"miss_rate", ds.miss_rate()}}},
      {"cycles", c.cycles},
      {"time_s", c.time_s},
      {"energy_J", c.energy_J},
      {"avg_power_W", c.avg_power_W},
      {"edp_Js", c.edp_Js},
  };
  std::cout << j.dump(2) << '\n';
}

double parse_bound(const std::string& s) {
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw Error("--winumax: not a number: '" + s + "'");
  }
  if (used != s.size()) throw Error("--winumax: not a number: '" + s + "'");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdmlab: configurable cache tuning by phase distance mapping"};
  app.require_subcommand(1);
  std::string params_path;
  app.add_option("--params", params_path, "energy/latency parameter JSON")->check(CLI::ExistingFile);

  auto* space = app.add_subcommand("space", "list the feasible cache configurations");

  std::string suite_path, gen_out;
  auto* gen = app.add_subcommand("gen", "generate synthetic phase traces from a suite file");
  gen->add_option("suite", suite_path, "suite JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "output directory")->required();

  std::string sim_trace, sim_icfg = kBaseCacheConfig.to_string(), sim_dcfg = kBaseCacheConfig.to_string();
  auto* sim = app.add_subcommand("sim", "simulate one trace on an I/D configuration pair");
  sim->add_option("trace", sim_trace, "trace file")->required()->check(CLI::ExistingFile);
  sim->add_option("--icfg", sim_icfg, "instruction cache size:assoc:line");
  sim->add_option("--dcfg", sim_dcfg, "data cache size:assoc:line");

  std::string oracle_workload, oracle_out;
  auto* oracle = app.add_subcommand("oracle", "exhaustive EDP table for every phase");
  oracle->add_option("workload", oracle_workload, "workload manifest")->required()->check(CLI::ExistingFile);
  oracle->add_option("--out", oracle_out, "CSV output (default stdout)");

  std::string tune_workload, tune_mode = "dynapdm", tune_out, tune_log, tune_csv, tune_winumax = "inf";
  TunerOptions topt;
  auto* tune = app.add_subcommand("tune", "run a tuner over a workload schedule");
  tune->add_option("workload", tune_workload, "workload manifest")->required()->check(CLI::ExistingFile);
  tune->add_option("--mode", tune_mode, "pdm, dynapdm or both")
      ->check(CLI::IsMember({"pdm", "dynapdm", "both"}));
  tune->add_option("--sd", topt.window_size, "initial distance window size");
  tune->add_flag("--sd-static", topt.static_window_size, "never merge windows");
  tune->add_option("--winumax", tune_winumax, "largest finite window bound (or inf)");
  tune->add_option("--rho", topt.retune_threshold, "relative EDP drift that triggers re-tuning");
  tune->add_option("--capacity", topt.window_capacity, "window table entries per cache");
  tune->add_option("--out", tune_out, "report JSON (default stdout)");
  tune->add_option("--log", tune_log, "interval log, one JSON object per line");
  tune->add_option("--csv", tune_csv, "per-phase CSV");

  std::string sweep_workload, sweep_out;
  std::vector<double> sweep_sizes{0.25, 0.5, 1.0};
  auto* sweep = app.add_subcommand("sweep-sd", "window count and savings per fixed window size");
  sweep->add_option("workload", sweep_workload, "workload manifest")->required()->check(CLI::ExistingFile);
  sweep->add_option("--sd-list", sweep_sizes, "window sizes")->delimiter(',');
  sweep->add_option("--out", sweep_out, "CSV output (default stdout)");

  std::uint64_t entries = 32;
  auto* footprint = app.add_subcommand("footprint", "storage bits of a distance window table");
  footprint->add_option("entries", entries, "table entries")->required();

  std::string calib_workload;
  auto* calibrate = app.add_subcommand("calibrate", "pick the size and associativity thresholds");
  calibrate->add_option("workload", calib_workload, "workload manifest")->required()->check(CLI::ExistingFile);

  auto* params_cmd = app.add_subcommand("params", "print the effective parameter set");

  CLI11_PARSE(app, argc, argv);

  try {
    const EnergyParams params = resolve_params(params_path);

    if (*space) {
      const DesignSpace ds = enumerate_design_space();
      std::cout << "index,size,assoc,line,sets\n";
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const CacheConfig& c = ds.configs[i];
        std::cout << i << ',' << c.size_bytes << ',' << c.associativity << ',' << c.line_bytes << ','
                  << c.sets() << '\n';
      }
    } else if (*gen) {
      const SuiteSpec suite = load_suite_spec(suite_path);
      const fs::path dir = gen_out;
      fs::create_directories(dir);
      WorkloadSchedule w;
      w.schedule = suite.schedule;
      for (const auto& spec : suite.phases) {
        const fs::path file = spec.phase_id + ".trace";
        write_trace(generate_synthetic(spec), dir / file);
        w.traces[spec.phase_id] = file;
      }
      write_workload(w, dir / "workload.json");
      std::cerr << "wrote " << suite.phases.size() << " traces and " << (dir / "workload.json").string()
                << '\n';
    } else if (*sim) {
      const ConfigPair pair{parse_config(sim_icfg), parse_config(sim_dcfg)};
      const PhaseTrace trace = parse_trace(sim_trace);
      const CacheStats is = simulate(trace, Stream::Instruction, pair.icache);
      const CacheStats ds = simulate(trace, Stream::Data, pair.dcache);
      print_cost(cost(is, ds, pair, params), is, ds);
    } else if (*oracle) {
      const Workload w = load_workload(oracle_workload);
      emit(oracle_out, [&](std::ostream& out) {
        write_oracle_csv_header(out);
        for (const auto& phase : w.phases) write_oracle_csv(exhaustive_search(phase, params), out);
      });
    } else if (*tune) {
      topt.win_u_max = parse_bound(tune_winumax);
      const Workload w = load_workload(tune_workload);
      RunOptions ro{topt, Thresholds{}, tune_mode != "dynapdm"};
      const RunResult r = run_experiment(w, params, ro);
      const ReportSections sections{tune_mode != "dynapdm", tune_mode != "pdm"};
      emit(tune_out, [&](std::ostream& out) { out << to_json(r.report, sections).dump(2) << '\n'; });
      if (!tune_log.empty()) {
        std::ofstream out = open_out(tune_log);
        write_log_jsonl(r.log, out);
      }
      if (!tune_csv.empty()) {
        std::ofstream out = open_out(tune_csv);
        write_report_csv(r.report, out);
      }
    } else if (*sweep) {
      const Workload w = load_workload(sweep_workload);
      const ProfileCache profiles(w);
      const auto rows = sweep_window_size(w, params, TunerOptions{}, sweep_sizes, profiles);
      emit(sweep_out, [&](std::ostream& out) {
        out << "window_size,window_count,mean_savings,mean_gap\n";
        out << std::setprecision(10);
        for (const auto& row : rows) {
          out << row.window_size << ',' << row.window_count << ',' << row.mean_savings << ','
              << row.mean_gap << '\n';
        }
      });
    } else if (*footprint) {
      const FootprintBits f = window_table_footprint_bits(entries);
      std::cout << "entries,id_bits,bound_bits,distance_bits,entry_bits,total_bits\n"
                << entries << ',' << f.id_bits << ',' << f.bound_bits << ',' << f.distance_bits << ','
                << f.entry_bits << ',' << f.total_bits << '\n';
    } else if (*calibrate) {
      const Workload w = load_workload(calib_workload);
      const std::uint32_t c_thr = calibrate_threshold(CacheParam::Size, w.phases, kBaseCacheConfig, params);
      CacheConfig fixed = kBaseCacheConfig;
      fixed.size_bytes = c_thr;
      const std::uint32_t a_thr = calibrate_threshold(CacheParam::Assoc, w.phases, fixed, params);
      std::cout << nlohmann::json{{"c_thr", c_thr}, {"a_thr", a_thr}}.dump(2) << '\n';
    } else if (*params_cmd) {
      std::cout << to_json(params).dump(2) << '\n';
    }
  } catch (const ParseError& e) {
    std::cerr << "pdmlab: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "pdmlab: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pdmlab: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
