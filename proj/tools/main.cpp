#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "uspde/analysis.hpp"
#include "uspde/errors.hpp"
#include "uspde/expint.hpp"
#include "uspde/problems.hpp"
#include "uspde/runner.hpp"

namespace {

using uspde::AnalysisKind;
using uspde::ConfigError;

AnalysisKind parse_kind(const std::string& s) {
  if (s == "transport") return AnalysisKind::transport_q();
  if (s == "heat") return AnalysisKind::heat_g();
  if (s.size() == 3 && s.compare(0, 2, "sl") == 0 && std::isdigit(s[2]))
    return AnalysisKind::general_sl(s[2] - '0');
  throw ConfigError("unknown spectrum kind '" + s + "' (transport, heat, slN)");
}

uspde::Preset parse_preset(const std::string& s) {
  if (s == "transport") return uspde::preset_transport();
  if (s == "heat") return uspde::preset_heat();
  if (s == "variable-transport") return uspde::preset_variable_transport();
  if (s == "fisher") return uspde::preset_fisher();
  throw ConfigError("unknown problem preset '" + s + "'");
}

// Stream sink: --out writes a file, otherwise stdout.
struct Sink {
  std::ofstream file;
  std::ostream& out;
  explicit Sink(const std::string& path)
      : file(path.empty() ? std::ofstream() : std::ofstream(path)),
        out(path.empty() ? std::cout : file) {
    if (!path.empty() && !file) throw uspde::Error("cannot write '" + path + "'");
  }
};

double median_ms(std::vector<double>& samples) {
  std::sort(samples.begin(), samples.end());
  std::size_t m = samples.size() / 2;
  return samples.size() % 2 ? samples[m]
                            : 0.5 * (samples[m - 1] + samples[m]);
}

void cmd_solve(const std::string& config_path) {
  uspde::RunConfig cfg = uspde::load_run_config(config_path);
  uspde::RunArtifacts art = uspde::run_solve(cfg);
  std::cout << std::setprecision(17) << "steps " << art.steps << "\n"
            << "final_time " << art.t_reached << "\n"
            << "n_final " << art.n_final << "\n"
            << "factorizations " << art.factorizations << "\n"
            << "cache_hits " << art.cache_hits << "\n"
            << "wall_seconds " << std::setprecision(3) << art.wall_seconds
            << "\n"
            << "solution " << art.solution_path << "\n"
            << "coefficients " << art.coefficients_path << "\n"
            << "manifest " << art.manifest_path << "\n";
}

void cmd_spectrum(const std::vector<std::string>& kinds,
                  const std::vector<Eigen::Index>& ns, const std::string& out) {
  std::vector<AnalysisKind> ks;
  for (const std::string& s : kinds) ks.push_back(parse_kind(s));
  Sink sink(out);
  uspde::write_rho_csv(sink.out, ks, ns);
}

void cmd_threshold(const std::string& problem, const std::string& stepper,
                   int approach, Eigen::Index n, double h_min, double h_max,
                   int grid, int steps, double growth, const std::string& out) {
  if (!(h_min > 0) || !(h_max > h_min) || grid < 2)
    throw ConfigError("need 0 < h-min < h-max and at least two grid points");
  uspde::Preset preset = parse_preset(problem);
  Eigen::VectorXd u0 = uspde::initial_coeffs(preset.initial, n);
  std::vector<double> h_grid(grid);
  double ratio = std::pow(h_max / h_min, 1.0 / (grid - 1));
  for (int i = 0; i < grid; ++i) h_grid[i] = h_min * std::pow(ratio, i);
  uspde::ThresholdResult r = uspde::stability_threshold_scan(
      preset.problem, {stepper, approach}, u0, h_grid, steps, growth);
  Sink sink(out);
  sink.out << std::setprecision(17)
           << "problem,stepper,n,h_stable,h_unstable,trials\n"
           << problem << ',' << stepper << ',' << n << ',' << r.h_stable << ','
           << r.h_unstable << ',' << r.trials << '\n';
}

void cmd_rounding(const std::string& stepper, int approach, Eigen::Index n,
                  double h, int steps, const std::string& out) {
  uspde::Preset tr = uspde::preset_transport();
  auto exact = [n](double t) {
    return uspde::initial_coeffs(
        [t](double x) { return std::exp(-200.0 * (x + t) * (x + t)); }, n);
  };
  uspde::GrowthResult g = uspde::rounding_growth_experiment(
      tr.problem, {stepper, approach}, n, h, steps, exact);
  Sink sink(out);
  uspde::write_growth_csv(sink.out, stepper, g);
  double unit = std::numeric_limits<double>::epsilon() *
                exact(0.0).lpNorm<Eigen::Infinity>();
  std::cerr << std::setprecision(6) << "slope " << g.slope << "\nr2 " << g.r2
            << "\nmax_error " << g.max_error << "\nmax_error_units "
            << g.max_error / unit << "\n";
}

void cmd_bench(const std::string& op, const std::vector<Eigen::Index>& ns,
               int reps, const std::string& out) {
  if (op != "step2" && op != "phi-apply")
    throw ConfigError("bench op is 'step2' or 'phi-apply'");
  Sink sink(out);
  sink.out << "op,n,median_ms,ratio\n";
  double prev = 0;
  for (Eigen::Index n : ns) {
    std::vector<double> ms;
    if (op == "step2") {
      uspde::Preset tr = uspde::preset_transport();
      uspde::StepperChoice rk3{"rk3", 2};
      uspde::StepState st;
      st.history = {uspde::initial_coeffs(tr.initial, n)};
      double h = 0.1 / double(n * n);
      uspde::take_step(tr.problem, rk3, st, h);  // warm the cached plans
      for (int i = 0; i < reps; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Eigen::VectorXd u = uspde::take_step(tr.problem, rk3, st, h);
        ms.push_back(std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count());
      }
    } else {
      uspde::Preset heat = uspde::preset_heat();
      uspde::PhiOperator phi(heat.problem, n, 0.01, uspde::cf_poles());
      Eigen::VectorXd xi = uspde::initial_coeffs(heat.initial, n);
      uspde::phi_apply(phi, 1, xi);  // warm
      for (int i = 0; i < reps; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Eigen::VectorXd u = uspde::phi_apply(phi, 1, xi);
        ms.push_back(std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count());
      }
    }
    double med = median_ms(ms);
    sink.out << std::setprecision(6) << op << ',' << n << ',' << med << ','
             << (prev > 0 ? med / prev : 1.0) << '\n';
    prev = med;
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("USPDE_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  CLI::App app{"Ultraspherical spectral solver for 1D time-dependent PDEs"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* solve = app.add_subcommand("solve", "Run a configured problem");
  solve->add_option("config", config_path, "JSON run configuration")
      ->required();

  CLI::App* analyze =
      app.add_subcommand("analyze", "Stability and performance reports");
  analyze->require_subcommand(1);

  std::vector<std::string> kinds{"transport", "heat"};
  std::vector<Eigen::Index> ns{8, 16, 32, 64};
  std::string out;
  CLI::App* spectrum = analyze->add_subcommand(
      "spectrum", "Spectral radii against the closed-form envelopes");
  spectrum->add_option("--kind", kinds, "transport, heat, or slN");
  spectrum->add_option("--n", ns, "truncation sizes");
  spectrum->add_option("--out", out, "CSV path (default stdout)");

  std::string problem = "transport", stepper = "forward-euler";
  int approach = 2, grid = 25, steps = 5000;
  Eigen::Index n = 80;
  double h_min = 0, h_max = 0, growth = 1e3;
  CLI::App* threshold = analyze->add_subcommand(
      "threshold", "Bracket the critical step size on a geometric h grid");
  threshold->add_option("--problem", problem, "preset name");
  threshold->add_option("--stepper", stepper, "stepper name");
  threshold->add_option("--approach", approach, "1 or 2");
  threshold->add_option("--n", n, "truncation size");
  threshold->add_option("--h-min", h_min, "smallest candidate h")->required();
  threshold->add_option("--h-max", h_max, "largest candidate h")->required();
  threshold->add_option("--grid", grid, "number of candidates");
  threshold->add_option("--steps", steps, "steps per trial");
  threshold->add_option("--growth", growth, "sup-norm growth flag");
  threshold->add_option("--out", out, "CSV path (default stdout)");

  std::string rstepper = "bdf3";
  Eigen::Index rn = 1025;
  double rh = 3.9e-7;
  int rsteps = 10000, rapproach = 2;
  CLI::App* rounding = analyze->add_subcommand(
      "rounding", "Per-step error growth when discretization error is below "
                  "machine precision");
  rounding->add_option("--stepper", rstepper, "stepper name");
  rounding->add_option("--approach", rapproach, "1 or 2");
  rounding->add_option("--n", rn, "truncation size");
  rounding->add_option("--dt", rh, "step size");
  rounding->add_option("--steps", rsteps, "step count");
  rounding->add_option("--out", out, "CSV path (default stdout)");

  std::string op = "step2";
  std::vector<Eigen::Index> bench_ns{256, 512, 1024, 2048};
  int reps = 20;
  CLI::App* bench = analyze->add_subcommand(
      "bench", "Median kernel timings across doubling sizes");
  bench->add_option("--op", op, "step2 or phi-apply");
  bench->add_option("--n", bench_ns, "sizes");
  bench->add_option("--reps", reps, "repetitions per size");
  bench->add_option("--out", out, "CSV path (default stdout)");

  solve->callback([&] { cmd_solve(config_path); });
  spectrum->callback([&] { cmd_spectrum(kinds, ns, out); });
  threshold->callback([&] {
    cmd_threshold(problem, stepper, approach, n, h_min, h_max, grid, steps,
                  growth, out);
  });
  rounding->callback(
      [&] { cmd_rounding(rstepper, rapproach, rn, rh, rsteps, out); });
  bench->callback([&] { cmd_bench(op, bench_ns, reps, out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const uspde::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
