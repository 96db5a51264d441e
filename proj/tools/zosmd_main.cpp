// zosmd: zeroth-order stochastic mirror descent solver for minimax excess
// risk problems over finite distribution sets.
//
// Subcommands:
//   run       execute the configured solver, write metrics.csv + report.json
//   diagnose  Monte-Carlo estimator bias/moment checks against the analytic bounds
//   compare   zeroth-order variant vs the first-order baseline, side by side
//   validate  parse the config, build the instance, check loss bounds
//
// Exit codes: 0 ok, 2 config error, 3 runtime failure, 4 diagnostic failure.

#include <CLI11.hpp>

#include "zosmd/config.hpp"
#include "zosmd/evaluation.hpp"
#include "zosmd/report_io.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

namespace fs = std::filesystem;
using namespace zosmd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitDiagnostic = 4;

struct CliOverrides {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  int seeds = 0;
};

ExperimentConfig load_with_overrides(const CliOverrides& ov) {
  ExperimentConfig cfg = load_config(ov.config_path);
  if (ov.seed >= 0) cfg.solver.seed = static_cast<std::uint64_t>(ov.seed);
  if (ov.seeds > 0) cfg.evaluation.seeds = ov.seeds;
  if (!ov.out_dir.empty()) cfg.output.directory = ov.out_dir;
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void warn_schedule_fallback(const ExperimentConfig& cfg, const Problem& p) {
  if (!cfg.solver.schedule_fallback) return;
  const bool missing_L = cfg.solver.variant == Variant::Smooth && !p.constants().L.has_value();
  const bool missing_Ls =
      cfg.solver.variant == Variant::NonSmooth && !p.constants().Lstar.has_value();
  if (missing_L || missing_Ls) {
    std::cerr << "warning: schedule constant " << (missing_L ? "L" : "L*")
              << " not recorded for this problem; using 1.0 with the configured multipliers\n";
  }
}

std::vector<RunReport> run_seeds(const Problem& p, const ExperimentConfig& cfg) {
  const int n = cfg.evaluation.seeds;
  std::vector<std::future<Trajectory>> futures;
  futures.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    SolverConfig scfg = cfg.solver;
    scfg.seed = cfg.solver.seed + static_cast<std::uint64_t>(k);
    futures.push_back(std::async(std::launch::async, [&p, scfg] { return run_solver(p, scfg); }));
  }
  std::vector<RunReport> reports;
  reports.reserve(static_cast<std::size_t>(n));
  for (auto& f : futures) {
    reports.push_back(evaluate(p, f.get(), cfg.evaluation.mc_risk_draws));
  }
  return reports;
}

int cmd_run(const CliOverrides& ov) {
  ExperimentConfig cfg = load_with_overrides(ov);
  auto problem = build_problem(cfg);
  warn_schedule_fallback(cfg, *problem);
  // Constructing the solver validates horizon/checkpoint/constants wiring.
  { Solver probe(*problem, cfg.solver); }

  const fs::path dir(cfg.output.directory);
  fs::create_directories(dir);
  const auto reports = run_seeds(*problem, cfg);
  const bool multi = cfg.evaluation.seeds > 1;
  bool all_ok = true;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const RunReport& rep = reports[k];
    all_ok = all_ok && rep.completed;
    ExperimentConfig seed_cfg = cfg;
    seed_cfg.solver.seed = cfg.solver.seed + k;
    seed_cfg.evaluation.seeds = 1;
    const std::string suffix = multi ? "_seed" + std::to_string(seed_cfg.solver.seed) : "";
    if (cfg.output.write_json) {
      write_file(dir / ("report" + suffix + ".json"), report_json(seed_cfg, rep).dump(2) + "\n");
    }
    if (cfg.output.write_csv) {
      write_file(dir / ("metrics" + suffix + ".csv"), metrics_csv(rep, cfg.solver.variant));
      write_file(dir / ("timings" + suffix + ".csv"), timings_csv(rep));
    }
    if (!rep.completed) {
      std::cerr << "run failed (seed " << seed_cfg.solver.seed << "): " << rep.error << "\n";
    }
  }
  if (multi && cfg.output.write_csv) {
    write_file(dir / "aggregate.csv", aggregate_csv(reports, cfg.solver.variant));
  }
  if (!reports.empty() && reports.front().completed && !reports.front().checkpoints.empty()) {
    const auto& last = reports.front().checkpoints.back();
    std::cout << "run: " << to_string(cfg.solver.variant) << " T=" << cfg.solver.T
              << " seeds=" << cfg.evaluation.seeds << " -> " << cfg.output.directory << "\n";
    if (std::isfinite(last.eps_phi)) {
      std::cout << "final eps_phi (seed " << cfg.solver.seed << ") = " << format_double(last.eps_phi)
                << "\n";
    }
  }
  return all_ok ? kExitOk : kExitRuntime;
}

int cmd_diagnose(const CliOverrides& ov) {
  ExperimentConfig cfg = load_with_overrides(ov);
  if (cfg.solver.variant == Variant::FirstOrderBaseline) {
    throw ConfigError("diagnose needs a zeroth-order variant (solver.variant)");
  }
  auto problem = build_problem(cfg);
  const DiagnosticsReport rep = estimator_diagnostics(
      *problem, problem->domain().dgf_center(), cfg.solver.variant, cfg.solver.mu_scale,
      cfg.evaluation.diagnostic_draws, cfg.solver.seed, cfg.solver.pair);

  const fs::path dir(cfg.output.directory);
  fs::create_directories(dir);
  nlohmann::json j;
  j["schema_version"] = 1;
  j["config"] = config_to_json(cfg);
  j["variant"] = to_string(rep.variant);
  j["N"] = rep.N;
  if (rep.variant == Variant::Smooth) {
    j["probe_mu"] = rep.probe_mu;
    j["bound_mu"] = rep.bound_mu;
  } else {
    j["probe_mu1"] = rep.probe_mu1;
    j["probe_mu2"] = rep.probe_mu2;
  }
  nlohmann::json dists = nlohmann::json::array();
  for (const auto& d : rep.per_distribution) {
    nlohmann::json e;
    e["i"] = d.i + 1;
    e["bias_norm"] = d.bias_norm;
    e["bias_cap"] = d.bias_cap;
    e["second_moment"] = d.second_moment;
    e["second_moment_bound"] = d.second_moment_bound;
    if (rep.variant == Variant::NonSmooth) e["fitted_c"] = d.fitted_c;
    e["bias_ok"] = d.bias_ok;
    e["moment_ok"] = d.moment_ok;
    dists.push_back(std::move(e));
    std::cout << "distribution " << (d.i + 1) << ": bias " << (d.bias_ok ? "ok" : "FAIL")
              << " (|bias|=" << format_double(d.bias_norm) << ", cap=" << format_double(d.bias_cap)
              << "), moment " << (d.moment_ok ? "ok" : "FAIL")
              << " (E||g||^2=" << format_double(d.second_moment)
              << ", bound=" << format_double(d.second_moment_bound) << ")\n";
  }
  j["distributions"] = dists;
  j["all_ok"] = rep.all_ok;
  write_file(dir / "diagnose_report.json", j.dump(2) + "\n");
  std::cout << (rep.all_ok ? "diagnose: all checks within slack\n"
                           : "diagnose: checks FAILED\n");
  return rep.all_ok ? kExitOk : kExitDiagnostic;
}

int cmd_compare(const CliOverrides& ov) {
  ExperimentConfig cfg = load_with_overrides(ov);
  auto problem = build_problem(cfg);
  if (!problem->has_loss_grad()) {
    throw ConfigError("compare needs per-sample gradients; empirical specs without gradients "
                      "are unsupported (problem.family)");
  }
  if (cfg.solver.variant == Variant::FirstOrderBaseline) {
    throw ConfigError("compare runs the configured ZO variant against the baseline; set "
                      "solver.variant to smooth or non-smooth");
  }
  warn_schedule_fallback(cfg, *problem);

  auto summarize = [&](Variant variant) {
    ExperimentConfig c = cfg;
    c.solver.variant = variant;
    const auto reports = run_seeds(*problem, c);
    double exc_inner = 0.0, exc_outer = 0.0, eps = 0.0;
    std::uint64_t vcalls = 0, gcalls = 0;
    int n = 0;
    for (const auto& rep : reports) {
      if (!rep.completed || rep.checkpoints.empty()) {
        throw std::runtime_error("comparison run failed: " + rep.error);
      }
      const auto& last = rep.checkpoints.back();
      double inner = 0.0;
      for (double e : last.excess_inner) inner += e;
      exc_inner += inner / static_cast<double>(last.excess_inner.size());
      exc_outer += last.max_excess_outer;
      eps += last.eps_phi;
      vcalls += rep.value_calls;
      gcalls += rep.grad_calls;
      ++n;
    }
    const double dn = static_cast<double>(n);
    return std::tuple{exc_inner / dn, exc_outer / dn, eps / dn, vcalls, gcalls};
  };

  const auto [zo_inner, zo_outer, zo_eps, zo_v, zo_g] = summarize(cfg.solver.variant);
  const auto [fo_inner, fo_outer, fo_eps, fo_v, fo_g] = summarize(Variant::FirstOrderBaseline);

  std::string csv = compare_csv_header();
  csv += compare_csv_row("zeroth-order", cfg.solver.variant, cfg.solver.T, cfg.solver.r,
                         cfg.solver.seed, cfg.evaluation.seeds, zo_inner, zo_outer, zo_eps, zo_v,
                         zo_g);
  csv += compare_csv_row("first-order", Variant::FirstOrderBaseline, cfg.solver.T, cfg.solver.r,
                         cfg.solver.seed, cfg.evaluation.seeds, fo_inner, fo_outer, fo_eps, fo_v,
                         fo_g);
  const fs::path dir(cfg.output.directory);
  fs::create_directories(dir);
  write_file(dir / "compare.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_validate(const CliOverrides& ov) {
  ExperimentConfig cfg = load_with_overrides(ov);
  auto problem = build_problem(cfg);
  try {
    Solver probe(*problem, cfg.solver);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  RandomStream stream(cfg.solver.seed);
  try {
    validate_instance(*problem, 10000, stream, oracle_margin(problem->dim()));
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  const auto& c = problem->constants();
  std::cout << "validate: ok\n"
            << "  family=" << problem->family() << " m=" << problem->m()
            << " d=" << problem->dim() << "\n"
            << "  C=" << (c.C ? format_double(*c.C) : "-")
            << " L=" << (c.L ? format_double(*c.L) : "-")
            << " L*=" << (c.Lstar ? format_double(*c.Lstar) : "-")
            << " G=" << (c.G ? format_double(*c.G) : "-")
            << " sigma=" << (c.sigma ? format_double(*c.sigma) : "-") << "\n"
            << "  D^2=" << format_double(problem->domain().bregman_radius_sq()) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zeroth-order stochastic mirror descent for minimax excess risk optimization"};
  app.require_subcommand(1);

  CliOverrides ov;
  auto add_common = [&ov](CLI::App* sub) {
    sub->add_option("--config", ov.config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", ov.seed, "override solver.seed");
    sub->add_option("--out", ov.out_dir, "override output.directory");
    sub->add_option("--seeds", ov.seeds, "override evaluation.seeds");
  };
  CLI::App* run = app.add_subcommand("run", "execute the configured experiment");
  CLI::App* diagnose = app.add_subcommand("diagnose", "estimator bias/moment checks");
  CLI::App* compare = app.add_subcommand("compare", "ZO variant vs first-order baseline");
  CLI::App* validate = app.add_subcommand("validate", "check config and instance");
  for (CLI::App* sub : {run, diagnose, compare, validate}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(ov);
    if (diagnose->parsed()) return cmd_diagnose(ov);
    if (compare->parsed()) return cmd_compare(ov);
    return cmd_validate(ov);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  }
}
