#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>

#include <Eigen/Core>

#include "coed/types.hpp"

namespace coed::config {

// Full experiment description. Defaults run the reference problem: 30x30
// mesh, drifting rotational transport, 9x9 candidate sensors, 13-sensor
// budget, frozen factorization at rank 60 + 5 oversamples.
struct ExperimentConfig {
  // mesh
  int mesh_n = 30;

  // pde
  double kappa = 0.15;
  double gamma_h = -1.0;
  double gamma_a = 1.0;
  std::string velocity = "drift-rotation";  // drift-rotation | rotation | zero
  double velocity_scale = 1.0;

  // control
  double region_x0 = 0.25, region_y0 = 0.25, region_x1 = 0.55, region_y1 = 0.55;
  double beta_reg = 1e-5;
  double T = 1.0;
  int nt = 20;
  std::string target = "uniform";  // uniform (u_bar = 1) | reachable

  // prior
  double alpha = 0.1;
  double beta_pr = 1.0;

  // noise
  double delta = 0.01;

  // sensors
  int sensor_rows = 9, sensor_cols = 9;

  // oed
  int k = 13;
  std::string criterion = "coed";  // which design downstream phases consume
  int random_samples = 200;

  // lowrank
  int k_f = 60, p = 5, trace_probes = 50;

  uint64_t seed = 42;
  std::string output_dir = "out";

  // runtime switches (flags, not config keys)
  bool exact = false;
  int threads = 0;

  std::function<Eigen::Vector2d(double, double)> velocity_field() const;
  int sensor_count() const { return sensor_rows * sensor_cols; }
};

// Flat key=value text: one assignment per line, '#' comments, blank lines
// ignored. Unknown keys, malformed values and out-of-range settings are all
// hard errors so a typo can never silently change an experiment.
ExperimentConfig parse(std::istream& in);
ExperimentConfig parse_file(const std::string& path);

// Applies one "key=value" assignment (the CLI override path).
void apply_assignment(ExperimentConfig& cfg, const std::string& line);

// Range and enum checks shared by every entry path.
void validate(const ExperimentConfig& cfg);

// Canonical key=value snapshot; parsing it back reproduces the config.
std::string serialize(const ExperimentConfig& cfg);

}  // namespace coed::config
