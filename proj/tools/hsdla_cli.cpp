// Command-line driver: problem generation, pipeline runs, oracle
// verification, and benchmark sweeps with machine-readable reports.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsdla/device.hpp"
#include "hsdla/oracle.hpp"
#include "hsdla/pipeline.hpp"
#include "hsdla/problem.hpp"

namespace {

using nlohmann::json;
using namespace hsdla;

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct RunOptions {
  std::string problem_path;
  std::string variant = "refined";
  std::string strategy = "cpu";
  std::vector<std::string> devices;
  double split_ratio = 1.0;
  bool split_calibrate = false;
  std::size_t block = 0;
  std::string kernel = "blocked";
  int threads = 0;
  std::string dispatch_log_path;
  bool verify = false;
  std::string csv_path;
  bool corrupt_h = false;  // negative-control hook for the test suite
};

kernels::KernelConfig make_kernel_config(const RunOptions& o) {
  kernels::KernelConfig kc;
  if (o.kernel == "reference") {
    kc.variant = kernels::Variant::Reference;
  } else if (o.kernel == "blocked") {
    kc.variant = kernels::Variant::BlockedParallel;
  } else {
    throw ConfigError("unknown kernel variant: " + o.kernel);
  }
  kc.threads = o.threads;
  return kc;
}

std::vector<device::DeviceDescriptor> parse_devices(
    const std::vector<std::string>& specs) {
  std::vector<device::DeviceDescriptor> descs;
  for (const auto& s : specs) descs.push_back(device::parse_device_spec(s));
  return descs;
}

double verify_tolerance(std::size_t n_g) {
  return 1e-10 * std::sqrt(static_cast<double>(n_g));
}

struct RunOutcome {
  pipeline::HSResult result;
  double wall_seconds = 0.0;
  json report;
  bool verify_ok = true;
};

void append_csv_row(const std::string& path, const json& row) {
  static const char* kHeader =
      "name,n_atoms,n_l,n_g,variant,strategy,devices,wall_s,gflops,"
      "total_flops,speedup,status\n";
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open CSV file: " + path);
  if (fresh) out << kHeader;
  out << row.value("name", std::string("-")) << ','
      << row["n_atoms"].get<std::size_t>() << ','
      << row["n_l"].get<std::size_t>() << ',' << row["n_g"].get<std::size_t>()
      << ',' << row["variant"].get<std::string>() << ','
      << row["strategy"].get<std::string>() << ','
      << row["devices"].get<std::size_t>() << ','
      << row["wall_s"].get<double>() << ',' << row["gflops"].get<double>()
      << ',' << row["total_flops"].get<std::uint64_t>() << ','
      << row.value("speedup", 1.0) << ','
      << row.value("status", std::string("ok")) << '\n';
}

RunOutcome execute(const ProblemInstance& p, const RunOptions& o,
                   const std::string& name = "-") {
  device::DevicePool pool(parse_devices(o.devices), make_kernel_config(o));
  device::DispatchLog log;

  pipeline::PipelineConfig cfg;
  cfg.variant = pipeline::parse_variant(o.variant);
  cfg.strategy = pipeline::parse_strategy(o.strategy);
  cfg.pool = &pool;
  cfg.block_override = o.block;
  cfg.kernel = pool.cpu_config();
  cfg.log = o.dispatch_log_path.empty() ? nullptr : &log;
  if (cfg.strategy == pipeline::Strategy::Static) {
    cfg.split_ratio = o.split_calibrate
                          ? hybrid::calibrate_split_ratio(pool, p.n_g,
                                                          p.n_atoms * p.n_l)
                          : o.split_ratio;
  }

  RunOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  out.result = pipeline::build_hs(p, cfg);
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  if (o.corrupt_h && p.n_g > 0) out.result.H(0, 0) += 1.0;

  json rep;
  rep["name"] = name;
  rep["variant"] = pipeline::variant_name(cfg.variant);
  rep["strategy"] = pipeline::strategy_name(cfg.strategy);
  rep["dims"] = {{"n_atoms", p.n_atoms}, {"n_l", p.n_l}, {"n_g", p.n_g}};
  rep["wall_seconds"] = out.wall_seconds;
  rep["gflops"] =
      out.wall_seconds > 0.0
          ? static_cast<double>(out.result.ledger.total()) / out.wall_seconds / 1e9
          : 0.0;
  json phases = json::array();
  for (const auto& ph : out.result.phases) {
    phases.push_back({{"name", ph.name}, {"seconds", ph.seconds}});
  }
  rep["phases"] = phases;
  json ledger;
  for (const auto& [k, v] : out.result.ledger.counts()) ledger[k] = v;
  rep["ledger"] = ledger;
  rep["total_flops"] = out.result.ledger.total();
  rep["peak_temp_bytes"] = out.result.peak_temp_bytes;
  rep["devices"] = pool.descriptions();
  rep["calibrated_cpu_rate"] = pool.calibrated_cpu_rate();
  json busy = json::array();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    busy.push_back({{"device", i},
                    {"busy_seconds", pool.device(i).busy_seconds()},
                    {"flops", pool.device(i).executed_flops()}});
  }
  rep["device_busy"] = busy;
  rep["warnings"] = out.result.warnings;

  if (o.verify) {
    if (p.n_g > oracle::kMaxNg) {
      throw ConfigError("problem too large for the oracle (n_g > " +
                        std::to_string(oracle::kMaxNg) + ")");
    }
    const HermitianView h_ref = oracle::direct_H(p);
    const HermitianView s_ref = oracle::direct_S(p);
    const double h_err =
        rel_frobenius_error_lower(out.result.H.matrix(), h_ref.matrix());
    const double s_err =
        rel_frobenius_error_lower(out.result.S.matrix(), s_ref.matrix());
    const double tol = verify_tolerance(p.n_g);
    out.verify_ok = h_err <= tol && s_err <= tol;
    rep["verify"] = {{"h_rel_error", h_err},
                     {"s_rel_error", s_err},
                     {"tolerance", tol},
                     {"ok", out.verify_ok}};
  }

  if (!o.dispatch_log_path.empty()) log.write(o.dispatch_log_path);
  out.report = std::move(rep);
  return out;
}

int cmd_gen(const std::string& preset, double scale, std::size_t na,
            std::size_t nl, std::size_t ng, std::uint64_t seed,
            std::size_t not_hpd, const std::string& out_path) {
  std::size_t a = na, l = nl, g = ng;
  if (!preset.empty()) {
    const auto p = find_preset(preset, scale);
    if (!p) throw ConfigError("unknown preset: " + preset);
    a = p->n_atoms;
    l = p->n_l;
    g = p->n_g;
  }
  if (a == 0 || l == 0 || g == 0) {
    throw ConfigError("need --preset or all of --na/--nl/--ng (nonzero)");
  }
  if (not_hpd > a) throw ConfigError("--not-hpd exceeds atom count");
  const ProblemInstance p = generate_problem(a, l, g, seed, not_hpd);
  save_problem(p, out_path);
  std::cout << json{{"path", out_path},
                    {"n_atoms", a},
                    {"n_l", l},
                    {"n_g", g},
                    {"seed", seed},
                    {"n_not_hpd", not_hpd}}
                   .dump()
            << '\n';
  return kExitOk;
}

int cmd_run(const RunOptions& o) {
  const ProblemInstance p = load_problem(o.problem_path);
  const RunOutcome out = execute(p, o);
  std::cout << out.report.dump() << '\n';
  if (!o.csv_path.empty()) {
    json row = {{"name", std::filesystem::path(o.problem_path).stem().string()},
                {"n_atoms", p.n_atoms},
                {"n_l", p.n_l},
                {"n_g", p.n_g},
                {"variant", o.variant},
                {"strategy", o.strategy},
                {"devices", o.devices.size()},
                {"wall_s", out.wall_seconds},
                {"gflops", out.report["gflops"].get<double>()},
                {"total_flops", out.result.ledger.total()},
                {"status", out.verify_ok ? "ok" : "verify_failed"}};
    append_csv_row(o.csv_path, row);
  }
  return out.verify_ok ? kExitOk : kExitVerify;
}

int cmd_verify(RunOptions o) {
  o.verify = true;
  const ProblemInstance p = load_problem(o.problem_path);
  const RunOutcome out = execute(p, o);
  const auto& v = out.report["verify"];
  std::cout << "H rel error: " << v["h_rel_error"].get<double>() << '\n'
            << "S rel error: " << v["s_rel_error"].get<double>() << '\n'
            << "tolerance:   " << v["tolerance"].get<double>() << '\n'
            << (out.verify_ok ? "PASS" : "FAIL") << '\n';
  return out.verify_ok ? kExitOk : kExitVerify;
}

struct BenchCell {
  std::string variant;
  std::string strategy;
};

BenchCell parse_cell(const std::string& s) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) {
    throw ConfigError("bench cell must be <variant>-<strategy>: " + s);
  }
  return {s.substr(0, dash), s.substr(dash + 1)};
}

int cmd_bench(const std::vector<std::string>& presets, double scale,
              const std::vector<std::string>& cells,
              const std::vector<std::size_t>& device_counts, double sim_rate,
              std::uint64_t seed, std::size_t not_hpd_frac_pct,
              const std::string& csv_path) {
  if (csv_path.empty()) throw ConfigError("bench requires --csv");
  for (const auto& preset : presets) {
    const auto pr = find_preset(preset, scale);
    if (!pr) throw ConfigError("unknown preset: " + preset);
    const std::size_t not_hpd = pr->n_atoms * not_hpd_frac_pct / 100;
    const ProblemInstance p =
        generate_problem(pr->n_atoms, pr->n_l, pr->n_g, seed, not_hpd);

    // baseline for speedup: original on the CPU with no accelerators
    RunOptions base;
    base.variant = "original";
    base.strategy = "cpu";
    double base_wall = 0.0;
    try {
      base_wall = execute(p, base, pr->name).wall_seconds;
    } catch (const std::exception&) {
      base_wall = 0.0;
    }

    for (const auto& cell : cells) {
      const BenchCell bc = parse_cell(cell);
      for (const std::size_t nd : device_counts) {
        RunOptions o;
        o.variant = bc.variant;
        o.strategy = bc.strategy;
        for (std::size_t d = 0; d < nd; ++d) {
          o.devices.push_back("sim:rate=" + std::to_string(sim_rate));
        }
        json row = {{"name", pr->name},   {"n_atoms", pr->n_atoms},
                    {"n_l", pr->n_l},     {"n_g", pr->n_g},
                    {"variant", bc.variant}, {"strategy", bc.strategy},
                    {"devices", nd}};
        try {
          const RunOutcome out = execute(p, o, pr->name);
          row["wall_s"] = out.wall_seconds;
          row["gflops"] = out.report["gflops"].get<double>();
          row["total_flops"] = out.result.ledger.total();
          row["speedup"] =
              out.wall_seconds > 0.0 ? base_wall / out.wall_seconds : 0.0;
          row["status"] = "ok";
        } catch (const std::exception& e) {
          row["wall_s"] = 0.0;
          row["gflops"] = 0.0;
          row["total_flops"] = std::uint64_t{0};
          row["speedup"] = 0.0;
          row["status"] = std::string("failed: ") + e.what();
        }
        append_csv_row(csv_path, row);
      }
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HSDLA driver: generate, run, verify, and benchmark H/S "
               "matrix constructions"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a problem file");
  std::string gen_preset, gen_out;
  double gen_scale = 1.0;
  std::size_t gen_na = 0, gen_nl = 0, gen_ng = 0, gen_not_hpd = 0;
  std::uint64_t gen_seed = 1;
  gen->add_option("--preset", gen_preset, "preset name, e.g. nacl-2.5");
  gen->add_option("--scale", gen_scale, "scale preset dims (rounded up)");
  gen->add_option("--na", gen_na, "number of atoms");
  gen->add_option("--nl", gen_nl, "basis functions per atom");
  gen->add_option("--ng", gen_ng, "number of plane waves");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--not-hpd", gen_not_hpd, "atoms with non-HPD T^[AA]");
  gen->add_option("-o,--output", gen_out, "output path")->required();

  auto add_run_flags = [](CLI::App* cmd, RunOptions& o) {
    cmd->add_option("problem", o.problem_path, "problem file")->required();
    cmd->add_option("--variant", o.variant, "original | refined");
    cmd->add_option("--strategy", o.strategy, "cpu | static | dynamic");
    cmd->add_option("--device", o.devices,
                    "device spec (repeatable), e.g. sim:rate=1.5,mem=4G");
    cmd->add_option("--split-ratio", o.split_ratio, "static split ratio m");
    cmd->add_flag("--split-calibrate", o.split_calibrate,
                  "measure m instead of --split-ratio");
    cmd->add_option("--block", o.block, "dynamic block-size override");
    cmd->add_option("--kernel", o.kernel, "reference | blocked");
    cmd->add_option("--threads", o.threads, "CPU worker threads (0 = auto)");
    cmd->add_option("--dispatch-log", o.dispatch_log_path,
                    "write per-op dispatch records to this file");
    cmd->add_flag("--corrupt-h", o.corrupt_h, "negative-control hook")
        ->group("");  // hidden
  };

  // run
  auto* run = app.add_subcommand("run", "run a pipeline and report");
  RunOptions run_opts;
  add_run_flags(run, run_opts);
  run->add_flag("--verify", run_opts.verify, "compare against the oracle");
  run->add_option("--csv", run_opts.csv_path, "append a CSV row");

  // verify
  auto* verify = app.add_subcommand("verify", "compare against the oracle");
  RunOptions verify_opts;
  add_run_flags(verify, verify_opts);

  // bench
  auto* bench = app.add_subcommand("bench", "sweep to CSV");
  std::vector<std::string> bench_presets;
  std::vector<std::string> bench_cells = {"original-cpu", "refined-cpu",
                                          "refined-static", "refined-dynamic"};
  std::vector<std::size_t> bench_devices = {1};
  double bench_scale = 1.0, bench_rate = 1.5;
  std::uint64_t bench_seed = 1;
  std::size_t bench_not_hpd_pct = 50;
  std::string bench_csv;
  bench->add_option("--preset", bench_presets, "presets to sweep")->required();
  bench->add_option("--scale", bench_scale, "dimension scale factor");
  bench->add_option("--cell", bench_cells, "<variant>-<strategy> cells");
  bench->add_option("--devices", bench_devices, "simulated device counts");
  bench->add_option("--rate", bench_rate, "simulated device rate factor");
  bench->add_option("--seed", bench_seed, "RNG seed");
  bench->add_option("--not-hpd-pct", bench_not_hpd_pct,
                    "percent of atoms with non-HPD T^[AA]");
  bench->add_option("--csv", bench_csv, "output CSV path")->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      return cmd_gen(gen_preset, gen_scale, gen_na, gen_nl, gen_ng, gen_seed,
                     gen_not_hpd, gen_out);
    }
    if (run->parsed()) return cmd_run(run_opts);
    if (verify->parsed()) return cmd_verify(verify_opts);
    if (bench->parsed()) {
      return cmd_bench(bench_presets, bench_scale, bench_cells, bench_devices,
                       bench_rate, bench_seed, bench_not_hpd_pct, bench_csv);
    }
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
