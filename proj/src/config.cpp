#include "zosmd/config.hpp"

#include <fstream>
#include <set>

namespace zosmd {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in section '" + section + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const T& fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for key '" + key + "'");
  }
}

Vec to_vec(const json& arr, const std::string& key) {
  if (!arr.is_array()) throw ConfigError("key '" + key + "' must be a numeric array");
  Vec v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t k = 0; k < arr.size(); ++k) {
    if (!arr[k].is_number()) throw ConfigError("key '" + key + "' must be a numeric array");
    v[static_cast<Eigen::Index>(k)] = arr[k].get<double>();
  }
  return v;
}

json from_vec(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(v[k]);
  return arr;
}

Variant parse_variant(const std::string& s) {
  if (s == "smooth") return Variant::Smooth;
  if (s == "non-smooth") return Variant::NonSmooth;
  if (s == "first-order-baseline") return Variant::FirstOrderBaseline;
  throw ConfigError("solver.variant must be smooth | non-smooth | first-order-baseline");
}

SmoothingPair parse_pair(const std::string& s) {
  if (s == "gaussian-gaussian") return SmoothingPair::GaussianGaussian;
  if (s == "ball-ball") return SmoothingPair::BallBall;
  if (s == "ball-sphere") return SmoothingPair::BallSphere;
  throw ConfigError("solver.smoothing_pair must be gaussian-gaussian | ball-ball | ball-sphere");
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(j, {"problem", "solver", "evaluation", "output"}, "<root>");
  if (!j.contains("problem") || !j.contains("solver")) {
    throw ConfigError("config needs 'problem' and 'solver' sections");
  }
  ExperimentConfig cfg;

  const json& jp = j.at("problem");
  reject_unknown_keys(jp,
                      {"family", "m", "d", "domain", "centers", "noise_scales", "offsets",
                       "csv_paths", "csv_header", "empirical_loss"},
                      "problem");
  cfg.family = get_or<std::string>(jp, "family", "");
  if (cfg.family != "shifted-quadratic" && cfg.family != "piecewise-absolute" &&
      cfg.family != "empirical-csv") {
    throw ConfigError(
        "problem.family must be shifted-quadratic | piecewise-absolute | empirical-csv");
  }
  cfg.m = get_or<int>(jp, "m", 0);
  cfg.d = get_or<int>(jp, "d", 0);
  if (cfg.m < 1) throw ConfigError("m must be >= 1 (problem.m)");
  if (cfg.d < 1) throw ConfigError("d must be >= 1 (problem.d)");
  if (!jp.contains("domain")) throw ConfigError("missing problem.domain");
  const json& jd = jp.at("domain");
  reject_unknown_keys(jd, {"kind", "radius", "lo", "hi"}, "problem.domain");
  cfg.domain_kind = get_or<std::string>(jd, "kind", "");
  if (cfg.domain_kind == "ball") {
    cfg.ball_radius = get_or<double>(jd, "radius", 0.0);
    if (!(cfg.ball_radius > 0.0)) throw ConfigError("domain radius must be > 0 (problem.domain.radius)");
  } else if (cfg.domain_kind == "box") {
    if (!jd.contains("lo") || !jd.contains("hi")) {
      throw ConfigError("box domain needs problem.domain.lo and problem.domain.hi");
    }
    cfg.box_lo = to_vec(jd.at("lo"), "problem.domain.lo");
    cfg.box_hi = to_vec(jd.at("hi"), "problem.domain.hi");
    if (cfg.box_lo.size() != cfg.d || cfg.box_hi.size() != cfg.d) {
      throw ConfigError("box bounds must have length d (problem.domain.lo/hi)");
    }
    for (Eigen::Index k = 0; k < cfg.box_lo.size(); ++k) {
      if (!(cfg.box_lo[k] < cfg.box_hi[k])) {
        throw ConfigError("box bounds need lo[k] < hi[k] (problem.domain)");
      }
    }
  } else {
    throw ConfigError("problem.domain.kind must be ball | box");
  }

  if (cfg.family == "empirical-csv") {
    cfg.csv_paths = get_or<std::vector<std::string>>(jp, "csv_paths", {});
    if (static_cast<int>(cfg.csv_paths.size()) != cfg.m) {
      throw ConfigError("csv_paths must list one file per distribution (problem.csv_paths)");
    }
    cfg.csv_header = get_or<bool>(jp, "csv_header", false);
    cfg.empirical_loss = get_or<std::string>(jp, "empirical_loss", "quadratic");
    if (cfg.empirical_loss != "quadratic" && cfg.empirical_loss != "absolute") {
      throw ConfigError("problem.empirical_loss must be quadratic | absolute");
    }
  } else {
    if (!jp.contains("centers")) throw ConfigError("missing problem.centers");
    const json& jc = jp.at("centers");
    if (!jc.is_array() || static_cast<int>(jc.size()) != cfg.m) {
      throw ConfigError("centers must list one vector per distribution (problem.centers)");
    }
    for (std::size_t i = 0; i < jc.size(); ++i) {
      Vec c = to_vec(jc[i], "problem.centers");
      if (c.size() != cfg.d) throw ConfigError("center dimension must equal d (problem.centers)");
      cfg.centers.push_back(std::move(c));
    }
    cfg.noise_scales =
        get_or<std::vector<double>>(jp, "noise_scales", std::vector<double>(cfg.m, 0.0));
    cfg.offsets = get_or<std::vector<double>>(jp, "offsets", std::vector<double>(cfg.m, 0.0));
    if (static_cast<int>(cfg.noise_scales.size()) != cfg.m ||
        static_cast<int>(cfg.offsets.size()) != cfg.m) {
      throw ConfigError("noise_scales/offsets must have length m (problem)");
    }
    for (double s : cfg.noise_scales) {
      if (s < 0.0) throw ConfigError("noise scales must be >= 0 (problem.noise_scales)");
    }
    for (double b : cfg.offsets) {
      if (b < 0.0) throw ConfigError("offsets must be >= 0 (problem.offsets)");
    }
  }

  const json& js = j.at("solver");
  reject_unknown_keys(js,
                      {"variant", "T", "r", "seed", "eta_scale", "mu_scale", "checkpoints",
                       "smoothing_pair", "share_outer_directions", "share_inner_directions",
                       "resample_outer", "schedule_fallback", "workers"},
                      "solver");
  cfg.solver.variant = parse_variant(get_or<std::string>(js, "variant", "smooth"));
  cfg.solver.T = get_or<long>(js, "T", 0);
  if (cfg.solver.T < 2) throw ConfigError("T must be >= 2 (solver.T)");
  cfg.solver.r = get_or<int>(js, "r", 1);
  if (cfg.solver.r < 1) throw ConfigError("r must be >= 1 (solver.r)");
  cfg.solver.seed = get_or<std::uint64_t>(js, "seed", 0);
  cfg.solver.eta_scale = get_or<double>(js, "eta_scale", 1.0);
  cfg.solver.mu_scale = get_or<double>(js, "mu_scale", 1.0);
  if (!(cfg.solver.eta_scale > 0.0) || !(cfg.solver.mu_scale > 0.0)) {
    throw ConfigError("schedule multipliers must be > 0 (solver.eta_scale / solver.mu_scale)");
  }
  cfg.solver.checkpoints = get_or<std::vector<long>>(js, "checkpoints", {});
  long prev = 0;
  for (long c : cfg.solver.checkpoints) {
    if (c < 2 || c > cfg.solver.T) throw ConfigError("checkpoints must lie in [2, T] (solver.checkpoints)");
    if (c <= prev) throw ConfigError("checkpoints must be strictly increasing (solver.checkpoints)");
    prev = c;
  }
  cfg.solver.pair = parse_pair(get_or<std::string>(js, "smoothing_pair", "ball-ball"));
  cfg.solver.share_outer_directions = get_or<bool>(js, "share_outer_directions", true);
  cfg.solver.share_inner_directions = get_or<bool>(js, "share_inner_directions", false);
  cfg.solver.resample_outer = get_or<bool>(js, "resample_outer", false);
  cfg.solver.schedule_fallback = get_or<bool>(js, "schedule_fallback", false);
  cfg.solver.workers = get_or<int>(js, "workers", 1);
  if (cfg.solver.workers < 1) throw ConfigError("workers must be >= 1 (solver.workers)");

  if (j.contains("evaluation")) {
    const json& je = j.at("evaluation");
    reject_unknown_keys(je, {"seeds", "diagnostic_draws", "mc_risk_draws"}, "evaluation");
    cfg.evaluation.seeds = get_or<int>(je, "seeds", 1);
    if (cfg.evaluation.seeds < 1) throw ConfigError("seeds must be >= 1 (evaluation.seeds)");
    cfg.evaluation.diagnostic_draws = get_or<long>(je, "diagnostic_draws", 100000);
    if (cfg.evaluation.diagnostic_draws < 10000) {
      throw ConfigError("diagnostic draws must be >= 10000 (evaluation.diagnostic_draws)");
    }
    cfg.evaluation.mc_risk_draws = get_or<long>(je, "mc_risk_draws", 20000);
    if (cfg.evaluation.mc_risk_draws < 1) {
      throw ConfigError("mc_risk_draws must be >= 1 (evaluation.mc_risk_draws)");
    }
  }
  if (j.contains("output")) {
    const json& jo = j.at("output");
    reject_unknown_keys(jo, {"directory", "formats"}, "output");
    cfg.output.directory = get_or<std::string>(jo, "directory", "out");
    if (cfg.output.directory.empty()) throw ConfigError("output directory must be nonempty (output.directory)");
    const auto formats = get_or<std::vector<std::string>>(jo, "formats", {"csv", "json"});
    cfg.output.write_csv = false;
    cfg.output.write_json = false;
    for (const auto& f : formats) {
      if (f == "csv") {
        cfg.output.write_csv = true;
      } else if (f == "json") {
        cfg.output.write_json = true;
      } else {
        throw ConfigError("unknown output format '" + f + "' (output.formats)");
      }
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse failure: ") + e.what());
  }
  if (j.is_object() && j.contains("schema_version") && j.contains("config")) {
    return parse_config(j.at("config"));
  }
  return parse_config(j);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json jp;
  jp["family"] = cfg.family;
  jp["m"] = cfg.m;
  jp["d"] = cfg.d;
  json jd;
  jd["kind"] = cfg.domain_kind;
  if (cfg.domain_kind == "ball") {
    jd["radius"] = cfg.ball_radius;
  } else {
    jd["lo"] = from_vec(cfg.box_lo);
    jd["hi"] = from_vec(cfg.box_hi);
  }
  jp["domain"] = jd;
  if (cfg.family == "empirical-csv") {
    jp["csv_paths"] = cfg.csv_paths;
    jp["csv_header"] = cfg.csv_header;
    jp["empirical_loss"] = cfg.empirical_loss;
  } else {
    json jc = json::array();
    for (const auto& c : cfg.centers) jc.push_back(from_vec(c));
    jp["centers"] = jc;
    jp["noise_scales"] = cfg.noise_scales;
    jp["offsets"] = cfg.offsets;
  }

  json js;
  js["variant"] = to_string(cfg.solver.variant);
  js["T"] = cfg.solver.T;
  js["r"] = cfg.solver.r;
  js["seed"] = cfg.solver.seed;
  js["eta_scale"] = cfg.solver.eta_scale;
  js["mu_scale"] = cfg.solver.mu_scale;
  js["checkpoints"] =
      cfg.solver.checkpoints.empty() ? geometric_checkpoints(cfg.solver.T) : cfg.solver.checkpoints;
  js["smoothing_pair"] = to_string(cfg.solver.pair);
  js["share_outer_directions"] = cfg.solver.share_outer_directions;
  js["share_inner_directions"] = cfg.solver.share_inner_directions;
  js["resample_outer"] = cfg.solver.resample_outer;
  js["schedule_fallback"] = cfg.solver.schedule_fallback;
  js["workers"] = cfg.solver.workers;

  json je;
  je["seeds"] = cfg.evaluation.seeds;
  je["diagnostic_draws"] = cfg.evaluation.diagnostic_draws;
  je["mc_risk_draws"] = cfg.evaluation.mc_risk_draws;

  json jo;
  jo["directory"] = cfg.output.directory;
  json formats = json::array();
  if (cfg.output.write_csv) formats.push_back("csv");
  if (cfg.output.write_json) formats.push_back("json");
  jo["formats"] = formats;

  json j;
  j["problem"] = jp;
  j["solver"] = js;
  j["evaluation"] = je;
  j["output"] = jo;
  return j;
}

WeightDomain build_domain(const ExperimentConfig& cfg) {
  if (cfg.domain_kind == "ball") return WeightDomain::ball(cfg.d, cfg.ball_radius);
  return WeightDomain::box(cfg.box_lo, cfg.box_hi);
}

std::unique_ptr<Problem> build_problem(const ExperimentConfig& cfg) {
  WeightDomain domain = build_domain(cfg);
  try {
    if (cfg.family == "shifted-quadratic") {
      return std::make_unique<ShiftedQuadratic>(std::move(domain), cfg.centers, cfg.noise_scales,
                                                cfg.offsets);
    }
    if (cfg.family == "piecewise-absolute") {
      return std::make_unique<PiecewiseAbsolute>(std::move(domain), cfg.centers, cfg.noise_scales,
                                                 cfg.offsets);
    }
    std::vector<std::vector<Vec>> tables;
    tables.reserve(cfg.csv_paths.size());
    for (const auto& path : cfg.csv_paths) {
      auto rows = ingest_csv(path, cfg.csv_header);
      for (const auto& row : rows) {
        if (row.size() != cfg.d) {
          throw ConfigError("csv rows in " + path + " have dimension " +
                            std::to_string(row.size()) + ", expected d=" + std::to_string(cfg.d));
        }
      }
      tables.push_back(std::move(rows));
    }
    const EmpiricalLoss loss =
        cfg.empirical_loss == "quadratic" ? EmpiricalLoss::Quadratic : EmpiricalLoss::Absolute;
    return std::make_unique<EmpiricalProblem>(std::move(domain), std::move(tables), loss);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace zosmd
