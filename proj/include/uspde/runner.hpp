#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "uspde/adaptivity.hpp"
#include "uspde/problems.hpp"
#include "uspde/stepping.hpp"

namespace uspde {

// A solve run as described by a JSON config document. Problems come either
// from a named preset (transport, heat, variable-transport, fisher,
// periodic-transport) or inline: operator coefficients as monomial lists,
// numbers, or named closed forms; boundary kinds plus values; the initial
// condition as a named function or an explicit Chebyshev coefficient list.
struct StepperConfig {
  std::string name = "rk3";
  int order = 3;  // exponential multistep only
};

struct PoleConfig {
  std::string kind = "cf";  // or "talbot"
  int q = 14;
};

struct RunConfig {
  nlohmann::json echo;  // the parsed document, replayed into the manifest

  std::string preset;  // empty for inline problems
  bool periodic = false;
  ProblemSpec problem;                    // polynomial-basis runs
  std::function<double(double)> initial;  // closed-form initial condition
  Eigen::VectorXd initial_chebyshev;      // or an explicit coefficient list

  int approach = 2;
  StepperConfig stepper;
  PoleConfig poles;

  Eigen::Index n = 0;     // fixed-truncation mode when positive
  bool adaptive = false;  // exactly one of the two modes
  AdaptConfig adapt;

  double h = 0;
  double t_final = 0;
  int snapshots = 11;  // equally spaced step indices, endpoints included
  std::string output_dir = ".";
  std::int64_t seed = 0;  // echoed; nothing in a solve consumes randomness
};

// Throws ConfigError on any malformed or inconsistent document.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

struct RunArtifacts {
  long steps = 0;
  double t_reached = 0;  // steps * h; t_final is rounded to a whole step count
  Eigen::Index n_final = 0;
  std::size_t factorizations = 0;
  std::size_t cache_hits = 0;
  double wall_seconds = 0;
  Eigen::VectorXd final_coeffs;    // Chebyshev runs
  Eigen::VectorXcd final_fourier;  // periodic runs
  std::vector<Eigen::Index> adaptive_sizes;
  std::vector<Eigen::Index> adaptive_attempted;
  int adaptive_warnings = 0;
  std::string solution_path, coefficients_path, manifest_path;
};

// Runs the configured problem and writes solution.csv (t,x,u on 257 equispaced
// output points), final_coefficients.json (plain JSON array; [re, im] pairs
// for periodic runs), and manifest.json (config echo, step and factorization
// counts, wall time) under output_dir. Timings appear only in the manifest, so
// the CSV and coefficient files are byte-identical across repeated runs.
RunArtifacts run_solve(const RunConfig& cfg);

}  // namespace uspde
