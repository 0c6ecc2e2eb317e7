#pragma once

#include "coed/bayes.hpp"
#include "coed/config.hpp"
#include "coed/control.hpp"
#include "coed/heat.hpp"
#include "coed/lowrank.hpp"
#include "coed/types.hpp"

namespace coed::cli {

// Everything a phase needs, assembled once from the configuration. The
// forward operators are rebuilt per use (they hold references).
struct Experiment {
  config::ExperimentConfig cfg;
  fem::Mesh mesh;
  fem::FEOperators ops;
  model::TerminalMap map;
  bayes::InverseProblem ip;
  control::ControlProblem problem;
  Vec m_true;
};

Experiment build_experiment(const config::ExperimentConfig& cfg);

lowrank::ForwardOps forward_ops(const Experiment& ex);

// The two-bump source used as ground truth in every synthetic run.
Vec truth_field(const fem::Mesh& mesh);

// Frozen rank clamped so the sketch fits the problem dimensions.
int frozen_rank(const config::ExperimentConfig& cfg, int n_y, int dim);

// Pipeline phases. Each writes its CSV artifacts plus a manifest entry into
// cfg.output_dir and prints a one-line summary. invert, oed and spectra are
// self-contained; control and uq consume the persisted data and design
// artifacts and fail with a ConfigError when those are missing.
void cmd_invert(const config::ExperimentConfig& cfg);
void cmd_oed(const config::ExperimentConfig& cfg);
void cmd_control(const config::ExperimentConfig& cfg);
void cmd_uq(const config::ExperimentConfig& cfg);
void cmd_spectra(const config::ExperimentConfig& cfg);
void cmd_all(const config::ExperimentConfig& cfg);

}  // namespace coed::cli
