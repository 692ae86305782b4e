#include "uspde/runner.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "uspde/analysis.hpp"
#include "uspde/errors.hpp"
#include "uspde/expint.hpp"
#include "uspde/factor_cache.hpp"
#include "uspde/series.hpp"

namespace uspde {

namespace {

using nlohmann::json;

const std::set<std::string> kTopKeys = {
    "problem", "initial", "kappa",     "approach",   "stepper", "poles",
    "n",       "adaptive", "h",        "t-final",    "snapshots",
    "output-dir", "seed"};

const std::set<std::string> kLmmNames = {"forward-euler", "backward-euler",
                                         "trapezoid",     "ab2",
                                         "ab4",           "bdf3"};
const std::set<std::string> kRkNames = {"rk3", "rk4"};

std::function<double(double)> named_initial(const std::string& name) {
  if (name == "gaussian-pulse")
    return [](double x) { return std::exp(-200.0 * x * x); };
  if (name == "offset-gaussian")
    return [](double x) { return std::exp(-400.0 * (x - 0.75) * (x - 0.75)); };
  if (name == "sine-2pi")
    return [](double x) { return std::sin(2.0 * M_PI * x); };
  if (name == "tanh-front")
    return [](double x) {
      return (1.0 - std::tanh(40.0 * x / std::sqrt(6.0))) / 4.0;
    };
  if (name == "exp-sine")
    return [](double x) { return std::exp(std::sin(M_PI * x)); };
  throw ConfigError("unknown initial condition '" + name + "'");
}

std::function<double(double)> named_coefficient(const std::string& name) {
  if (name == "one") return [](double) { return 1.0; };
  if (name == "variable-speed")
    return [](double x) {
      double s = std::sin((x - 1.0) * (x - 1.0));
      return 0.6 + 3.0 * s * s;
    };
  throw ConfigError("unknown operator coefficient '" + name + "'");
}

// One entry of the operator list: null (absent), a number (constant), a
// monomial coefficient list [p0, p1, ...], or a named closed form.
std::function<double(double)> coefficient_entry(const json& e) {
  if (e.is_null()) return nullptr;
  if (e.is_number()) {
    double c = e.get<double>();
    if (c == 0.0) return nullptr;
    return [c](double) { return c; };
  }
  if (e.is_string()) return named_coefficient(e.get<std::string>());
  if (e.is_array()) {
    std::vector<double> p = e.get<std::vector<double>>();
    if (p.empty()) return nullptr;
    return [p](double x) {
      double acc = 0;
      for (std::size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
      return acc;
    };
  }
  throw ConfigError("operator entries are null, numbers, arrays, or names");
}

BoundaryCondition parse_boundary(const json& b) {
  if (!b.is_object() || !b.contains("kind"))
    throw ConfigError("boundary conditions are objects with a 'kind'");
  std::string kind = b.at("kind").get<std::string>();
  double value = b.value("value", 0.0);
  if (kind == "dirichlet-left") return BoundaryCondition::dirichlet_left(value);
  if (kind == "dirichlet-right") return BoundaryCondition::dirichlet_right(value);
  if (kind == "neumann-left") return BoundaryCondition::neumann_left(value);
  if (kind == "neumann-right") return BoundaryCondition::neumann_right(value);
  if (kind == "custom") {
    if (!b.contains("deriv") || !b.contains("x0"))
      throw ConfigError("custom boundary conditions need 'deriv' and 'x0'");
    return BoundaryCondition::custom(b.at("deriv").get<int>(),
                                     b.at("x0").get<double>(), value);
  }
  throw ConfigError("unknown boundary kind '" + kind + "'");
}

void parse_initial(const json& e, RunConfig& cfg) {
  if (e.is_string()) {
    cfg.initial = named_initial(e.get<std::string>());
    return;
  }
  const json* arr = nullptr;
  if (e.is_array()) arr = &e;
  if (e.is_object() && e.contains("coefficients")) arr = &e.at("coefficients");
  if (!arr || !arr->is_array() || arr->empty())
    throw ConfigError("initial condition: name or Chebyshev coefficient list");
  std::vector<double> c = arr->get<std::vector<double>>();
  cfg.initial_chebyshev =
      Eigen::Map<const Eigen::VectorXd>(c.data(), Eigen::Index(c.size()));
  cfg.initial = nullptr;
}

void parse_problem(const json& doc, RunConfig& cfg) {
  const json& p = doc.at("problem");
  if (p.is_string()) {
    cfg.preset = p.get<std::string>();
    double kappa = doc.value("kappa", std::nan(""));
    bool has_kappa = doc.contains("kappa");
    Preset preset;
    if (cfg.preset == "transport") preset = preset_transport();
    else if (cfg.preset == "heat") preset = has_kappa ? preset_heat(kappa) : preset_heat();
    else if (cfg.preset == "variable-transport") preset = preset_variable_transport();
    else if (cfg.preset == "fisher") preset = has_kappa ? preset_fisher(kappa) : preset_fisher();
    else if (cfg.preset == "periodic-transport") cfg.periodic = true;
    else throw ConfigError("unknown preset '" + cfg.preset + "'");
    if (has_kappa && cfg.preset != "heat" && cfg.preset != "fisher")
      throw ConfigError("'kappa' only parameterizes the heat and fisher presets");
    if (cfg.periodic) {
      cfg.initial = periodic_initial;
    } else {
      cfg.problem = std::move(preset.problem);
      cfg.initial = std::move(preset.initial);
    }
    return;
  }

  if (!p.is_object())
    throw ConfigError("'problem' is a preset name or an inline object");
  if (!p.contains("operator") || !p.at("operator").is_array() ||
      p.at("operator").empty())
    throw ConfigError("inline problems need a nonempty 'operator' list");
  std::vector<std::function<double(double)>> coeffs;
  for (const json& e : p.at("operator")) coeffs.push_back(coefficient_entry(e));
  if (!p.contains("boundary") || !p.at("boundary").is_array())
    throw ConfigError("inline problems need a 'boundary' list");
  try {
    cfg.problem.linear = OperatorSpec::from_callables(coeffs);
    for (const json& b : p.at("boundary"))
      cfg.problem.boundary.push_back(parse_boundary(b));
    cfg.problem.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("inline problem: ") + e.what());
  }
  if (!doc.contains("initial"))
    throw ConfigError("inline problems need an 'initial' condition");
}

void parse_stepper(const json& doc, RunConfig& cfg) {
  if (!doc.contains("stepper")) throw ConfigError("missing 'stepper'");
  const json& s = doc.at("stepper");
  if (s.is_string()) {
    cfg.stepper.name = s.get<std::string>();
  } else if (s.is_object() && s.contains("name")) {
    cfg.stepper.name = s.at("name").get<std::string>();
    cfg.stepper.order = s.value("order", 3);
  } else {
    throw ConfigError("'stepper' is a name or {name, order}");
  }
  const std::string& name = cfg.stepper.name;
  bool classical = kLmmNames.count(name) || kRkNames.count(name);
  bool exponential = name == "krogstad" || name == "ems";
  if (!classical && !exponential)
    throw ConfigError("unknown stepper '" + name + "'");
  if (name == "ems" && (cfg.stepper.order < 1 || cfg.stepper.order > 4))
    throw ConfigError("exponential multistep order must be 1..4");

  if (doc.contains("poles")) {
    const json& q = doc.at("poles");
    cfg.poles.kind = q.value("kind", std::string("cf"));
    if (cfg.poles.kind != "cf" && cfg.poles.kind != "talbot")
      throw ConfigError("pole kind is 'cf' or 'talbot'");
    cfg.poles.q = q.value("q", cfg.poles.kind == "cf" ? 14 : 32);
  }
  if (exponential) {
    int need = name == "ems" ? cfg.stepper.order : 3;
    if (cfg.poles.kind == "cf" && need > 3)
      throw ConfigError("the shipped cf table stops at phi_3");
    if (cfg.periodic) throw ConfigError("exponential steppers are not wired to the periodic path");
    if (cfg.adaptive)
      throw ConfigError("exponential steppers run at fixed truncation");
  }
  if (cfg.periodic && !kLmmNames.count(name))
    throw ConfigError("the periodic path supports multistep steppers only");
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
  for (const auto& [key, _] : doc.items())
    if (!kTopKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");

  RunConfig cfg;
  cfg.echo = doc;
  if (!doc.contains("problem")) throw ConfigError("missing 'problem'");

  // Mode first: stepper validation depends on it.
  bool has_n = doc.contains("n");
  cfg.adaptive = doc.contains("adaptive");
  if (has_n == cfg.adaptive)
    throw ConfigError("exactly one of 'n' and 'adaptive' selects the mode");
  if (has_n) {
    cfg.n = doc.at("n").get<Eigen::Index>();
    if (cfg.n < 2) throw ConfigError("'n' must be at least 2");
  } else {
    const json& a = doc.at("adaptive");
    if (!a.is_object()) throw ConfigError("'adaptive' is an object");
    cfg.adapt.tol = a.value("tol", cfg.adapt.tol);
    cfg.adapt.n_min = a.value("n-min", cfg.adapt.n_min);
    cfg.adapt.n_max = a.value("n-max", cfg.adapt.n_max);
    cfg.adapt.keep_plateau = a.value("keep-plateau", cfg.adapt.keep_plateau);
    try {
      cfg.adapt.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("adaptive: ") + e.what());
    }
  }

  parse_problem(doc, cfg);
  if (doc.contains("initial")) parse_initial(doc.at("initial"), cfg);
  if (cfg.periodic) {
    if (cfg.initial_chebyshev.size())
      throw ConfigError("periodic runs take named initial conditions only");
    if (cfg.adaptive) throw ConfigError("the periodic path runs at fixed n");
    if (cfg.n % 2 == 0) throw ConfigError("periodic runs need odd 'n'");
  }

  parse_stepper(doc, cfg);
  // Default approach by family: the square-solve path (2) is the fast one for
  // explicit steppers but loses stability with implicit schemes once h times
  // the spectral radius is large, so those default to the bordered solve (1).
  bool implicit_lmm = cfg.stepper.name == "backward-euler" ||
                      cfg.stepper.name == "trapezoid" ||
                      cfg.stepper.name == "bdf3";
  cfg.approach = doc.value("approach", implicit_lmm ? 1 : 2);
  if (cfg.approach != 1 && cfg.approach != 2)
    throw ConfigError("'approach' is 1 or 2");

  if (!doc.contains("h") || !doc.contains("t-final"))
    throw ConfigError("missing 'h' or 't-final'");
  cfg.h = doc.at("h").get<double>();
  cfg.t_final = doc.at("t-final").get<double>();
  if (!(cfg.h > 0) || !(cfg.t_final > 0))
    throw ConfigError("'h' and 't-final' must be positive");

  cfg.snapshots = doc.value("snapshots", 11);
  if (cfg.snapshots < 2) throw ConfigError("'snapshots' must be at least 2");
  cfg.output_dir = doc.value("output-dir", std::string("."));
  cfg.seed = doc.value("seed", std::int64_t(0));
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  return parse_run_config(doc);
}

namespace {

// Snapshot step indices: snapshots equally spaced points of 0..steps,
// endpoints included, consecutive duplicates dropped.
std::vector<long> snapshot_steps(long steps, int snapshots) {
  std::vector<long> ks;
  for (int j = 0; j < snapshots; ++j) {
    long k = std::lround(double(steps) * j / (snapshots - 1));
    if (ks.empty() || ks.back() != k) ks.push_back(k);
  }
  return ks;
}

struct CsvWriter {
  std::ofstream out;
  explicit CsvWriter(const std::string& path) : out(path) {
    if (!out) throw Error("cannot write '" + path + "'");
    out << std::setprecision(17) << "t,x,u\n";
  }
  void snapshot(double t, const CoeffSeries& s) {
    for (int i = 0; i < 257; ++i) {
      double x = -1.0 + 2.0 * i / 256.0;
      out << t << ',' << x << ',' << evaluate(s, x) << '\n';
    }
  }
};

json coeffs_json(const Eigen::VectorXd& c) {
  json a = json::array();
  for (Eigen::Index i = 0; i < c.size(); ++i) a.push_back(c[i]);
  return a;
}

json coeffs_json(const Eigen::VectorXcd& c) {
  json a = json::array();
  for (Eigen::Index i = 0; i < c.size(); ++i)
    a.push_back(json::array({c[i].real(), c[i].imag()}));
  return a;
}

// Fixed-truncation classical stepping (multistep or Runge-Kutta).
void run_classical(const RunConfig& cfg, long steps, const Eigen::VectorXd& u0,
                   CsvWriter& csv, RunArtifacts& art) {
  StepperChoice choice{cfg.stepper.name, cfg.approach};
  int r = choice.history();
  if (steps < r)
    throw ConfigError("t-final spans fewer steps than the startup window");

  StepState st;
  if (r > 1) {
    st = bootstrap_history(cfg.problem, r, cfg.approach, u0, 0.0, cfg.h);
  } else {
    st.history = {u0};
    st.t = 0;
  }

  std::vector<long> ks = snapshot_steps(steps, cfg.snapshots);
  std::size_t next = 0;
  auto capture = [&](long k, const Eigen::VectorXd& u) {
    while (next < ks.size() && ks[next] == k) {
      csv.snapshot(k * cfg.h, CoeffSeries{Basis::chebyshev(), u});
      ++next;
    }
  };
  for (int j = 0; j < r; ++j) capture(j, st.history[j]);

  for (long k = r; k <= steps; ++k) {
    Eigen::VectorXd u = take_step(cfg.problem, choice, st, cfg.h);
    if (!u.allFinite())
      throw StepperFailure("non-finite solution at step " + std::to_string(k) +
                           "; reduce h or use approach 1");
    st.history.push_back(u);
    if (Eigen::Index(st.history.size()) > r) st.history.erase(st.history.begin());
    st.t = k * cfg.h;
    capture(k, u);
  }
  art.final_coeffs = st.history.back();
  art.n_final = art.final_coeffs.size();
}

// Fixed-truncation exponential stepping (Krogstad or multistep of the
// configured order, bootstrapped by Krogstad steps).
void run_exponential(const RunConfig& cfg, long steps, const Eigen::VectorXd& u0,
                     CsvWriter& csv, RunArtifacts& art) {
  int p = cfg.stepper.name == "ems" ? cfg.stepper.order : 1;
  int j_max = cfg.stepper.name == "ems" ? std::max(3, p) : 3;
  PoleSet ps = cfg.poles.kind == "cf" ? cf_poles(cfg.poles.q, std::min(j_max, 3))
                                      : talbot_poles(cfg.poles.q, j_max);
  PhiOperator op(cfg.problem, u0.size(), cfg.h, std::move(ps));

  std::vector<long> ks = snapshot_steps(steps, cfg.snapshots);
  std::size_t next = 0;
  auto capture = [&](long k, const Eigen::VectorXd& u) {
    while (next < ks.size() && ks[next] == k) {
      csv.snapshot(k * cfg.h, CoeffSeries{Basis::chebyshev(), u});
      ++next;
    }
  };

  StepState st;
  st.history = {u0};
  st.t = 0;
  capture(0, u0);
  for (long k = 1; k <= steps; ++k) {
    Eigen::VectorXd u;
    if (cfg.stepper.name == "krogstad" || Eigen::Index(st.history.size()) < p) {
      u = etd_krogstad_step(op, st.history.back(), st.t);
    } else {
      u = exp_multistep_step(op, st, p);
    }
    st.history.push_back(u);
    if (Eigen::Index(st.history.size()) > std::max(p, 1))
      st.history.erase(st.history.begin());
    st.t = k * cfg.h;
    capture(k, u);
  }
  art.final_coeffs = st.history.back();
  art.n_final = art.final_coeffs.size();
}

// Periodic Fourier path: the operator is a diagonal, so multistep schemes act
// elementwise; startup history comes from the closed-form diagonal flow.
void run_periodic(const RunConfig& cfg, long steps, CsvWriter& csv,
                  RunArtifacts& art) {
  Eigen::VectorXcd ldiag = periodic_transport_diag(cfg.n);
  Eigen::VectorXcd u0 = periodic_initial_coeffs(cfg.initial, cfg.n);
  LmmScheme sch = StepperChoice{cfg.stepper.name, 2}.lmm();
  if (steps < sch.r)
    throw ConfigError("t-final spans fewer steps than the startup window");

  std::vector<Eigen::VectorXcd> hist;
  for (int j = 0; j < sch.r; ++j)
    hist.push_back((ldiag * (cfg.h * j)).array().exp() * u0.array());

  std::vector<long> ks = snapshot_steps(steps, cfg.snapshots);
  std::size_t next = 0;
  auto capture = [&](long k, const Eigen::VectorXcd& u) {
    while (next < ks.size() && ks[next] == k) {
      csv.snapshot(k * cfg.h, CoeffSeries{Basis::fourier(), u});
      ++next;
    }
  };
  for (int j = 0; j < sch.r; ++j) capture(j, hist[j]);

  for (long k = sch.r; k <= steps; ++k) {
    Eigen::VectorXcd u = step_periodic_lmm(sch, hist, ldiag, cfg.h);
    hist.push_back(std::move(u));
    if (Eigen::Index(hist.size()) > sch.r) hist.erase(hist.begin());
    capture(k, hist.back());
  }
  art.final_fourier = hist.back();
  art.n_final = art.final_fourier.size();
}

// Adaptive truncation; snapshots record the initial and final profiles only,
// since intermediate lengths vary step to step.
void run_adaptive_mode(const RunConfig& cfg, long steps, const Eigen::VectorXd& u0,
                       CsvWriter& csv, RunArtifacts& art) {
  StepperChoice choice{cfg.stepper.name, cfg.approach};
  csv.snapshot(0.0, CoeffSeries{Basis::chebyshev(), u0});

  if (!choice.is_rk()) {
    AdaptRunResult res = run_adaptive(cfg.problem, choice.lmm(), u0, 0.0, cfg.h,
                                      int(steps), cfg.adapt, cfg.approach);
    art.final_coeffs = res.state.history.back();
    art.adaptive_sizes = std::move(res.sizes);
    art.adaptive_attempted = std::move(res.attempted);
    art.adaptive_warnings = res.warnings;
  } else {
    RkScheme sch = choice.rk();
    StepState st;
    st.history = {u0};
    st.t = 0;
    std::set<Eigen::Index> attempted;
    for (long k = 1; k <= steps; ++k) {
      AdaptResult a = adapt_step(cfg.problem, sch, st, cfg.h, cfg.adapt,
                                 cfg.approach);
      Eigen::Index tried = st.history.back().size();
      for (int d = 0; d <= a.doublings; ++d) {
        attempted.insert(tried);
        tried *= 2;
      }
      art.adaptive_sizes.push_back(a.n_used);
      art.adaptive_warnings += a.stability_warning ? 1 : 0;
      st.history = {a.u};
      st.t = k * cfg.h;
    }
    art.final_coeffs = st.history.back();
    art.adaptive_attempted.assign(attempted.begin(), attempted.end());
  }
  art.n_final = art.final_coeffs.size();
  csv.snapshot(steps * cfg.h, CoeffSeries{Basis::chebyshev(), art.final_coeffs});
}

}  // namespace

RunArtifacts run_solve(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  clear_step_plans();
  FactorCache<double>::instance().clear();
  FactorCache<double>::instance().reset_counters();
  FactorCache<std::complex<double>>::instance().clear();
  FactorCache<std::complex<double>>::instance().reset_counters();

  RunArtifacts art;
  art.steps = std::max<long>(1, std::lround(cfg.t_final / cfg.h));
  art.t_reached = art.steps * cfg.h;
  art.solution_path = (fs::path(cfg.output_dir) / "solution.csv").string();
  art.coefficients_path =
      (fs::path(cfg.output_dir) / "final_coefficients.json").string();
  art.manifest_path = (fs::path(cfg.output_dir) / "manifest.json").string();

  auto t0 = std::chrono::steady_clock::now();
  CsvWriter csv(art.solution_path);

  if (cfg.periodic) {
    run_periodic(cfg, art.steps, csv, art);
  } else {
    Eigen::VectorXd u0;
    if (cfg.adaptive) {
      u0 = cfg.initial_chebyshev.size()
               ? cfg.initial_chebyshev
               : resolve_function(cfg.initial, cfg.adapt.tol,
                                  cfg.adapt.n_min, cfg.adapt.n_max);
      run_adaptive_mode(cfg, art.steps, u0, csv, art);
    } else {
      if (cfg.initial_chebyshev.size()) {
        if (cfg.initial_chebyshev.size() > cfg.n)
          throw ConfigError("initial coefficient list longer than 'n'");
        u0 = pad(cfg.initial_chebyshev, cfg.n);
      } else {
        u0 = initial_coeffs(cfg.initial, cfg.n);
      }
      if (cfg.stepper.name == "krogstad" || cfg.stepper.name == "ems")
        run_exponential(cfg, art.steps, u0, csv, art);
      else
        run_classical(cfg, art.steps, u0, csv, art);
    }
  }
  csv.out.close();
  if (!csv.out) throw Error("failed writing '" + art.solution_path + "'");

  art.factorizations = FactorCache<double>::instance().factorizations() +
                       FactorCache<std::complex<double>>::instance().factorizations();
  art.cache_hits = FactorCache<double>::instance().hits() +
                   FactorCache<std::complex<double>>::instance().hits();
  art.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();

  {
    std::ofstream out(art.coefficients_path);
    if (!out) throw Error("cannot write '" + art.coefficients_path + "'");
    out << (cfg.periodic ? coeffs_json(art.final_fourier)
                         : coeffs_json(art.final_coeffs))
               .dump(2)
        << '\n';
  }
  {
    json manifest = {
        {"config", cfg.echo},
        {"steps", art.steps},
        {"final_time", art.t_reached},
        {"n_final", art.n_final},
        {"factorizations", art.factorizations},
        {"cache_hits", art.cache_hits},
        {"wall_seconds", art.wall_seconds},
        {"seed", cfg.seed},
        {"outputs",
         {{"solution", art.solution_path},
          {"coefficients", art.coefficients_path}}},
    };
    if (cfg.adaptive) {
      manifest["adaptive"] = {
          {"sizes", art.adaptive_sizes},
          {"attempted", art.adaptive_attempted},
          {"warnings", art.adaptive_warnings},
      };
    }
    std::ofstream out(art.manifest_path);
    if (!out) throw Error("cannot write '" + art.manifest_path + "'");
    out << manifest.dump(2) << '\n';
  }
  return art;
}

}  // namespace uspde
