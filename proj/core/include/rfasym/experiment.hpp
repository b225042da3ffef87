#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rfasym/ensemble.hpp"
#include "rfasym/predict.hpp"
#include "rfasym/saddle.hpp"

namespace rfasym {

enum class Engine { Theory, Empirical, Both };
enum class Formulation { Feature, Gaussian, Both };

// Full experiment description, parsed from a key = value config file with an
// embedded schema-version field.
struct ExperimentConfig {
  int schema_version = 1;
  Task task = Task::Regression;
  TeacherKind teacher = TeacherKind::Identity;
  double rho = 1.0;
  double noise = 0.0;       // Delta
  double flip_prob = 0.0;   // p
  ActivationKind activation = ActivationKind::ReLU;
  LossKind loss = LossKind::Squared;
  Predictor phi_hat = Predictor::Identity;
  std::vector<double> lambdas = {1e-2};
  double alpha = 2.0;
  std::vector<double> etas;  // empty = default grid
  EnsembleKind ensemble = EnsembleKind::GaussianIID;
  std::string ensemble_file;  // FromFile features
  std::string spectrum_file;  // eigenvalue file backing the theory law
  int n = 400;
  int trials = 50;
  std::uint64_t seed = 1;
  Engine engine = Engine::Both;
  Formulation formulation = Formulation::Feature;
  GenErrorMode gen_mode = GenErrorMode::ClosedFormOverlap;
  int fresh_samples = 100000;
  int envelope_order = 48;

  TeacherSpec teacher_spec() const;
  LossSpec loss_spec() const;
  Activation activation_fn() const;
  std::vector<double> eta_grid() const;
};

// 30 log-spaced points in [0.05, 4], densified near eta = 1.
std::vector<double> default_eta_grid();

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical serialization (sorted keys, %.17g numbers); basis of the config
// hash carried by every output row.
std::string canonical_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

struct Diagnostic {
  enum class Severity { Warning, Error };
  Severity severity;
  std::string message;
};

std::vector<Diagnostic> validate(const ExperimentConfig& cfg);

struct EmpiricalSummary {
  double train_mean = 0.0, train_se = 0.0;
  double gen_mean = 0.0, gen_se = 0.0;
  double q_mean = 0.0, beta_mean = 0.0, vartheta_mean = 0.0;
};

struct RowResult {
  double lambda = 0.0;
  double eta = 0.0;
  int m = 0;
  int k = 0;
  double delta = 0.0;
  std::optional<SaddleSolution> theory;
  double theory_gen = 0.0;
  std::optional<EmpiricalSummary> feature;
  std::optional<EmpiricalSummary> gaussian;
  int trials_ok = 0;
  int trials_failed = 0;
};

struct RunOutput {
  std::vector<RowResult> rows;
  std::vector<std::string> trial_errors;
  bool partial_failures = false;
};

// One output row per (lambda, eta); deterministic given the seed. Theory-only
// runs never touch the RNG.
RunOutput run(const ExperimentConfig& cfg, int workers = 0);

void write_csv(std::ostream& out, const ExperimentConfig& cfg, const RunOutput& result);
void write_jsonl(std::ostream& out, const ExperimentConfig& cfg, const RunOutput& result);

}  // namespace rfasym
