#include "rfasym/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace rfasym {

namespace {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_double_list(const std::string& value, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': cannot parse number '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

double parse_double(const std::string& value, const std::string& key) {
  const auto v = parse_double_list(value, key);
  if (v.size() != 1) throw ConfigError("config key '" + key + "': expected a single number");
  return v[0];
}

long parse_long(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse integer '" + value + "'");
  }
}

std::string activation_key(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::SoftPlus: return "softplus";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Erf: return "erf";
    case ActivationKind::Sign: return "sign";
    case ActivationKind::BinaryStep: return "binarystep";
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Custom: return "custom";
  }
  return "?";
}

std::string ensemble_key(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::GaussianIID: return "gaussian";
    case EnsembleKind::RandomOrthogonal: return "orthogonal";
    case EnsembleKind::FromFile: return "file";
  }
  return "?";
}

}  // namespace

TeacherSpec ExperimentConfig::teacher_spec() const {
  switch (teacher) {
    case TeacherKind::Identity: return TeacherSpec::identity(rho, noise);
    case TeacherKind::Relu: return TeacherSpec::relu(rho, noise);
    case TeacherKind::SignFlip: return TeacherSpec::sign_flip(rho, flip_prob);
  }
  throw ConfigError("unknown teacher");
}

LossSpec ExperimentConfig::loss_spec() const {
  switch (loss) {
    case LossKind::Squared: return LossSpec::squared();
    case LossKind::Hinge: return LossSpec::hinge();
    case LossKind::Lad: return LossSpec::lad();
    case LossKind::Logistic: return LossSpec::logistic();
  }
  throw ConfigError("unknown loss");
}

Activation ExperimentConfig::activation_fn() const {
  return activation_from_name(activation_key(activation));
}

std::vector<double> ExperimentConfig::eta_grid() const {
  if (!etas.empty()) return etas;
  return default_eta_grid();
}

std::vector<double> default_eta_grid() {
  // 24 log-spaced points on [0.05, 4] plus extra resolution around eta = 1
  std::vector<double> grid;
  const int base = 24;
  const double lo = std::log(0.05), hi = std::log(4.0);
  for (int i = 0; i < base; ++i)
    grid.push_back(std::exp(lo + (hi - lo) * static_cast<double>(i) / (base - 1)));
  for (double x : {0.85, 0.9, 0.95, 1.0, 1.05, 1.1}) grid.push_back(x);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-9; }),
             grid.end());
  return grid;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  bool saw_version = false;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
    if (!kv.emplace(key, value).second)
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key +
                        "'");
  }

  for (const auto& [key, value] : kv) {
    if (key == "schema_version") {
      cfg.schema_version = static_cast<int>(parse_long(value, key));
      saw_version = true;
    } else if (key == "task") {
      if (value == "regression") cfg.task = Task::Regression;
      else if (value == "classification") cfg.task = Task::Classification;
      else throw ConfigError("config key 'task': expected regression|classification");
    } else if (key == "teacher") {
      cfg.teacher = teacher_from_name(value);
    } else if (key == "rho") {
      cfg.rho = parse_double(value, key);
    } else if (key == "noise") {
      cfg.noise = parse_double(value, key);
    } else if (key == "flip_prob") {
      cfg.flip_prob = parse_double(value, key);
    } else if (key == "activation") {
      cfg.activation = activation_from_name(value).kind();
    } else if (key == "loss") {
      cfg.loss = loss_from_name(value).kind;
    } else if (key == "phi_hat") {
      cfg.phi_hat = predictor_from_name(value);
    } else if (key == "lambda") {
      cfg.lambdas = parse_double_list(value, key);
    } else if (key == "alpha") {
      cfg.alpha = parse_double(value, key);
    } else if (key == "eta") {
      cfg.etas = parse_double_list(value, key);
    } else if (key == "ensemble") {
      if (value.rfind("file:", 0) == 0) {
        cfg.ensemble = EnsembleKind::FromFile;
        cfg.ensemble_file = trim(value.substr(5));
      } else {
        cfg.ensemble = ensemble_from_name(value);
      }
    } else if (key == "spectrum_file") {
      cfg.spectrum_file = value;
    } else if (key == "n") {
      cfg.n = static_cast<int>(parse_long(value, key));
    } else if (key == "trials") {
      cfg.trials = static_cast<int>(parse_long(value, key));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_long(value, key));
    } else if (key == "engine") {
      if (value == "theory") cfg.engine = Engine::Theory;
      else if (value == "empirical") cfg.engine = Engine::Empirical;
      else if (value == "both") cfg.engine = Engine::Both;
      else throw ConfigError("config key 'engine': expected theory|empirical|both");
    } else if (key == "formulation") {
      if (value == "feature") cfg.formulation = Formulation::Feature;
      else if (value == "gaussian") cfg.formulation = Formulation::Gaussian;
      else if (value == "both") cfg.formulation = Formulation::Both;
      else throw ConfigError("config key 'formulation': expected feature|gaussian|both");
    } else if (key == "gen_mode") {
      if (value == "overlap") cfg.gen_mode = GenErrorMode::ClosedFormOverlap;
      else if (value == "fresh") cfg.gen_mode = GenErrorMode::FreshSamples;
      else throw ConfigError("config key 'gen_mode': expected overlap|fresh");
    } else if (key == "fresh_samples") {
      cfg.fresh_samples = static_cast<int>(parse_long(value, key));
    } else if (key == "envelope_order") {
      cfg.envelope_order = static_cast<int>(parse_long(value, key));
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (!saw_version) throw ConfigError("config is missing the schema_version field");
  if (cfg.schema_version != 1)
    throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["schema_version"] = std::to_string(cfg.schema_version);
  kv["task"] = cfg.task == Task::Regression ? "regression" : "classification";
  kv["teacher"] = teacher_name(cfg.teacher);
  kv["rho"] = format_double(cfg.rho);
  kv["noise"] = format_double(cfg.noise);
  kv["flip_prob"] = format_double(cfg.flip_prob);
  kv["activation"] = activation_key(cfg.activation);
  kv["loss"] = loss_name(cfg.loss);
  kv["phi_hat"] = predictor_name(cfg.phi_hat);
  {
    std::string s;
    for (double l : cfg.lambdas) s += (s.empty() ? "" : ",") + format_double(l);
    kv["lambda"] = s;
  }
  kv["alpha"] = format_double(cfg.alpha);
  {
    std::string s;
    for (double e : cfg.eta_grid()) s += (s.empty() ? "" : ",") + format_double(e);
    kv["eta"] = s;
  }
  kv["ensemble"] = cfg.ensemble == EnsembleKind::FromFile ? "file:" + cfg.ensemble_file
                                                          : ensemble_key(cfg.ensemble);
  if (!cfg.spectrum_file.empty()) kv["spectrum_file"] = cfg.spectrum_file;
  kv["n"] = std::to_string(cfg.n);
  kv["trials"] = std::to_string(cfg.trials);
  kv["seed"] = std::to_string(cfg.seed);
  kv["engine"] = cfg.engine == Engine::Theory     ? "theory"
                 : cfg.engine == Engine::Empirical ? "empirical"
                                                   : "both";
  kv["formulation"] = cfg.formulation == Formulation::Feature    ? "feature"
                      : cfg.formulation == Formulation::Gaussian ? "gaussian"
                                                                 : "both";
  kv["gen_mode"] = cfg.gen_mode == GenErrorMode::ClosedFormOverlap ? "overlap" : "fresh";
  kv["fresh_samples"] = std::to_string(cfg.fresh_samples);
  kv["envelope_order"] = std::to_string(cfg.envelope_order);

  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  // FNV-1a 64
  const std::string s = canonical_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<Diagnostic> validate(const ExperimentConfig& cfg) {
  std::vector<Diagnostic> diags;
  auto error = [&](const std::string& m) {
    diags.push_back({Diagnostic::Severity::Error, m});
  };
  auto warn = [&](const std::string& m) {
    diags.push_back({Diagnostic::Severity::Warning, m});
  };

  if (!(cfg.alpha > 0.0)) error("alpha must be positive");
  if (!(cfg.rho > 0.0)) error("rho must be positive");
  if (cfg.noise < 0.0) error("noise must be nonnegative");
  if (cfg.flip_prob < 0.0 || cfg.flip_prob > 0.5)
    error("flip_prob must lie in [0, 1/2]");
  if (cfg.n < 1) error("n must be at least 1");
  if (cfg.trials < 1) error("trials must be at least 1");
  const auto etas = cfg.eta_grid();
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!(etas[i] > 0.0)) {
      error("eta grid must be positive");
      break;
    }
    if (i > 0 && etas[i] <= etas[i - 1]) {
      error("eta grid must be strictly increasing");
      break;
    }
  }
  for (double l : cfg.lambdas)
    if (!(l > 0.0)) {
      error("lambda must be positive");
      break;
    }

  const bool teacher_classification = cfg.teacher == TeacherKind::SignFlip;
  if (teacher_classification && cfg.task != Task::Classification)
    error("the sign-flip teacher produces binary labels; set task = classification");
  if (!teacher_classification && cfg.task != Task::Regression)
    error("continuous teachers require task = regression");
  if (teacher_classification && cfg.noise > 0.0)
    error("the sign-flip teacher does not take additive noise");
  if (cfg.loss != LossKind::Squared && cfg.task == Task::Regression)
    error("hinge/lad/logistic losses expect binary labels; set task = classification");

  // moments-level checks (A.4-style positivity of the linear component)
  try {
    const ActivationMoments m = moments(cfg.activation_fn());
    const bool odd = cfg.activation_fn().is_odd();
    if (!odd && (cfg.loss == LossKind::Hinge || cfg.loss == LossKind::Lad))
      warn("hinge/lad loss with a non-odd activation lies outside the strict-convexity "
           "regime of the asymptotic theory; predictions are validated empirically");
    if (cfg.task == Task::Classification && cfg.noise > 0.0)
      warn("noisy classification labels use the experimental 3-D quadrature path");
    (void)m;
  } catch (const Error& e) {
    error(std::string("activation: ") + e.what());
  }

  if (cfg.ensemble == EnsembleKind::FromFile) {
    if (cfg.ensemble_file.empty()) error("ensemble = file:PATH requires a path");
    if (cfg.engine != Engine::Empirical && cfg.spectrum_file.empty())
      error("theory curves for file ensembles need spectrum_file (one eigenvalue per line)");
  }
  if (cfg.gen_mode == GenErrorMode::FreshSamples && cfg.fresh_samples < 100)
    error("fresh_samples must be at least 100");
  return diags;
}

namespace {

SpectralLaw law_for(const ExperimentConfig& cfg, double delta) {
  switch (cfg.ensemble) {
    case EnsembleKind::GaussianIID:
      return SpectralLaw::marchenko_pastur(delta);
    case EnsembleKind::RandomOrthogonal:
      return SpectralLaw::orthogonal(delta);
    case EnsembleKind::FromFile:
      return SpectralLaw::empirical(load_eigenvalues(cfg.spectrum_file), delta);
  }
  throw ConfigError("unknown ensemble");
}

struct TrialOutcome {
  bool ok = false;
  std::string error;
  double train_f = 0.0, gen_f = 0.0, q_f = 0.0, beta_f = 0.0, vartheta_f = 0.0;
  bool have_gauss = false;
  double train_g = 0.0, gen_g = 0.0;
};

struct PointTask {
  std::size_t row = 0;
  double lambda = 0.0;
  double eta = 0.0;
  int m = 0, k = 0;
  std::uint64_t trial_base = 0;
  int trial = 0;
};

TrialOutcome run_trial(const ExperimentConfig& cfg, const PointTask& task,
                       const TeacherSpec& teacher, const LossSpec& loss,
                       const ActivationMoments& m, const Activation& act) {
  TrialOutcome out;
  const std::uint64_t id = task.trial_base + static_cast<std::uint64_t>(task.trial);

  Rng features_rng = derive_stream(cfg.seed, id, Stream::Features);
  Rng teacher_rng = derive_stream(cfg.seed, id, Stream::Teacher);
  Rng data_rng = derive_stream(cfg.seed, id, Stream::Data);
  Rng noise_rng = derive_stream(cfg.seed, id, Stream::Noise);

  FeatureEnsemble ens;
  switch (cfg.ensemble) {
    case EnsembleKind::GaussianIID:
      ens = FeatureEnsemble::gaussian(cfg.n, task.k);
      break;
    case EnsembleKind::RandomOrthogonal:
      ens = FeatureEnsemble::orthogonal(cfg.n, task.k);
      break;
    case EnsembleKind::FromFile:
      ens = FeatureEnsemble::from_file(cfg.ensemble_file);
      break;
  }
  const Eigen::MatrixXd F = sample_features(ens, features_rng);
  const Eigen::VectorXd xi = sample_teacher_vector(static_cast<int>(F.rows()), cfg.rho,
                                                   teacher_rng);
  const Eigen::MatrixXd A = sample_gaussian_matrix(task.m, static_cast<int>(F.rows()), data_rng);
  const Eigen::VectorXd proj = A * xi;
  const std::vector<double> y_vec =
      sample_labels(teacher, std::span<const double>(proj.data(), proj.size()), noise_rng);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(y_vec.data(), y_vec.size());

  const Eigen::MatrixXd lin = A * F;  // shared by both designs

  const bool want_feature = cfg.formulation != Formulation::Gaussian;
  const bool want_gauss = cfg.formulation != Formulation::Feature;

  Eigen::VectorXd w_f;
  if (want_feature) {
    Eigen::MatrixXd design = lin;
    for (Eigen::Index i = 0; i < design.rows(); ++i)
      for (Eigen::Index j = 0; j < design.cols(); ++j) design(i, j) = act(design(i, j));
    const ErmResult erm = solve_erm(design, y, loss, task.lambda);
    w_f = erm.w;
    const Overlaps o = measure(F, xi, w_f, m);
    Rng fresh = derive_stream(cfg.seed, id, Stream::FreshEval);
    const EmpiricalErrors errs =
        empirical_errors(design, y, loss, task.lambda, w_f, F, xi, teacher, m, act, cfg.phi_hat,
                         cfg.gen_mode, cfg.fresh_samples, false, fresh);
    out.train_f = errs.train;
    out.gen_f = errs.gen;
    out.q_f = o.q;
    out.beta_f = o.beta;
    out.vartheta_f = o.vartheta;
  }

  if (want_gauss) {
    Rng z_rng = derive_stream(cfg.seed, id, Stream::ZChannel);
    Eigen::MatrixXd design = m.mu1 * lin;
    const double mu_star = m.mu_star();
    for (Eigen::Index i = 0; i < design.rows(); ++i)
      for (Eigen::Index j = 0; j < design.cols(); ++j)
        design(i, j) += m.mu0 + mu_star * z_rng.normal();
    ErmOptions opts;
    if (want_feature && w_f.size() == design.cols()) opts.warm_start = &w_f;
    const ErmResult erm = solve_erm(design, y, loss, task.lambda, opts);
    const Overlaps o = measure(F, xi, erm.w, m);
    Rng fresh = derive_stream(cfg.seed, id, Stream::Probe);
    const EmpiricalErrors errs =
        empirical_errors(design, y, loss, task.lambda, erm.w, F, xi, teacher, m, act,
                         cfg.phi_hat, cfg.gen_mode, cfg.fresh_samples, true, fresh);
    out.have_gauss = true;
    out.train_g = errs.train;
    out.gen_g = errs.gen;
    if (!want_feature) {
      out.q_f = o.q;
      out.beta_f = o.beta;
      out.vartheta_f = o.vartheta;
    }
  }

  out.ok = true;
  return out;
}

EmpiricalSummary summarize(const std::vector<double>& train, const std::vector<double>& gen,
                           const std::vector<double>& q, const std::vector<double>& beta,
                           const std::vector<double>& vartheta) {
  EmpiricalSummary s;
  const double n = static_cast<double>(train.size());
  auto mean = [&](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / n;
  };
  auto se = [&](const std::vector<double>& v, double mu) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / (n - 1.0) / n);
  };
  s.train_mean = mean(train);
  s.train_se = se(train, s.train_mean);
  s.gen_mean = mean(gen);
  s.gen_se = se(gen, s.gen_mean);
  s.q_mean = mean(q);
  s.beta_mean = mean(beta);
  s.vartheta_mean = mean(vartheta);
  return s;
}

}  // namespace

RunOutput run(const ExperimentConfig& cfg, int workers) {
  {
    const auto diags = validate(cfg);
    std::string msg;
    for (const auto& d : diags)
      if (d.severity == Diagnostic::Severity::Error) msg += d.message + "; ";
    if (!msg.empty()) throw ConfigError(msg);
  }

  const TeacherSpec teacher = cfg.teacher_spec();
  const LossSpec loss = cfg.loss_spec();
  const Activation act = cfg.activation_fn();
  const ActivationMoments m = moments(act);
  const std::vector<double> etas = cfg.eta_grid();

  RunOutput output;
  output.rows.resize(cfg.lambdas.size() * etas.size());
  for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
    for (std::size_t ei = 0; ei < etas.size(); ++ei) {
      RowResult& row = output.rows[li * etas.size() + ei];
      row.lambda = cfg.lambdas[li];
      row.eta = etas[ei];
      row.m = static_cast<int>(std::lround(cfg.alpha * cfg.n));
      row.k = static_cast<int>(std::lround(row.eta * row.m));
      row.k = std::max(row.k, 1);
      row.delta = row.eta * cfg.alpha;
    }
  }

  // theory pass: contiguous eta chunks per worker, each walked sequentially
  // so warm starts carry along the grid
  if (cfg.engine != Engine::Empirical) {
    int nworkers = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    nworkers = std::max(1, std::min<int>(nworkers, static_cast<int>(etas.size())));
    auto solve_chunk = [&](std::size_t li, std::size_t begin, std::size_t end) {
      double wq = 0.1, wb = 0.5, wv = 0.0;
      bool have_warm = false;
      for (std::size_t ei = begin; ei < end; ++ei) {
        RowResult& row = output.rows[li * etas.size() + ei];
        SaddleConfig scfg{loss,       teacher, m, law_for(cfg, row.delta), row.lambda,
                          row.eta};
        scfg.quad.order = cfg.envelope_order;
        if (have_warm) {
          scfg.init_q = wq;
          scfg.init_beta = wb;
          scfg.init_vartheta = wv;
        }
        SaddleSolution sol = solve_saddle(scfg);
        row.theory_gen =
            gen_error(sol.q_star, sol.beta_star, sol.vartheta_star, teacher, m, cfg.phi_hat);
        row.theory = std::move(sol);
        wq = row.theory->q_star;
        wb = row.theory->beta_star;
        wv = row.theory->vartheta_star;
        have_warm = true;
      }
    };
    for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
      std::vector<std::thread> pool;
      const std::size_t per = (etas.size() + nworkers - 1) / nworkers;
      for (int w = 1; w < nworkers; ++w) {
        const std::size_t begin = per * w;
        if (begin >= etas.size()) break;
        pool.emplace_back(solve_chunk, li, begin, std::min(begin + per, etas.size()));
      }
      solve_chunk(li, 0, std::min(per, etas.size()));
      for (auto& th : pool) th.join();
    }
  }

  if (cfg.engine == Engine::Theory) return output;

  // empirical pass: independent trials over a bounded worker pool, merged
  // deterministically by trial index
  std::vector<PointTask> tasks;
  for (std::size_t row_idx = 0; row_idx < output.rows.size(); ++row_idx) {
    const RowResult& row = output.rows[row_idx];
    for (int trial = 0; trial < cfg.trials; ++trial) {
      PointTask task;
      task.row = row_idx;
      task.lambda = row.lambda;
      task.eta = row.eta;
      task.m = row.m;
      task.k = row.k;
      task.trial_base = static_cast<std::uint64_t>(row_idx) * static_cast<std::uint64_t>(cfg.trials);
      task.trial = trial;
      tasks.push_back(task);
    }
  }

  std::vector<TrialOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  int nworkers = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  nworkers = std::max(1, std::min<int>(nworkers, static_cast<int>(tasks.size())));

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        outcomes[i] = run_trial(cfg, tasks[i], teacher, loss, m, act);
      } catch (const std::exception& e) {
        outcomes[i].ok = false;
        outcomes[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < nworkers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // merge per row
  for (std::size_t row_idx = 0; row_idx < output.rows.size(); ++row_idx) {
    RowResult& row = output.rows[row_idx];
    std::vector<double> train_f, gen_f, q_f, beta_f, vth_f, train_g, gen_g;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].row != row_idx) continue;
      const TrialOutcome& o = outcomes[i];
      if (!o.ok) {
        ++row.trials_failed;
        output.trial_errors.push_back(o.error);
        continue;
      }
      ++row.trials_ok;
      train_f.push_back(cfg.formulation == Formulation::Gaussian ? o.train_g : o.train_f);
      gen_f.push_back(cfg.formulation == Formulation::Gaussian ? o.gen_g : o.gen_f);
      q_f.push_back(o.q_f);
      beta_f.push_back(o.beta_f);
      vth_f.push_back(o.vartheta_f);
      if (o.have_gauss && cfg.formulation == Formulation::Both) {
        train_g.push_back(o.train_g);
        gen_g.push_back(o.gen_g);
      }
    }
    if (!train_f.empty()) {
      EmpiricalSummary s = summarize(train_f, gen_f, q_f, beta_f, vth_f);
      if (cfg.formulation == Formulation::Gaussian)
        row.gaussian = s;
      else
        row.feature = s;
    }
    if (!train_g.empty()) {
      EmpiricalSummary s;
      const double n = static_cast<double>(train_g.size());
      double acc = 0.0;
      for (double x : train_g) acc += x;
      s.train_mean = acc / n;
      double var = 0.0;
      for (double x : train_g) var += (x - s.train_mean) * (x - s.train_mean);
      s.train_se = train_g.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
      acc = 0.0;
      for (double x : gen_g) acc += x;
      s.gen_mean = acc / n;
      var = 0.0;
      for (double x : gen_g) var += (x - s.gen_mean) * (x - s.gen_mean);
      s.gen_se = gen_g.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
      row.gaussian = s;
    }
  }
  output.partial_failures = !output.trial_errors.empty();
  return output;
}

namespace {

const char* kCsvColumns =
    "lambda,eta,m,k,delta,theory_train,theory_gen,theory_q,theory_beta,theory_vartheta,"
    "theory_t,emp_train_mean,emp_train_se,emp_gen_mean,emp_gen_se,emp_q_mean,emp_beta_mean,"
    "emp_vartheta_mean,gauss_train_mean,gauss_train_se,gauss_gen_mean,gauss_gen_se,"
    "trials_ok,trials_failed";

}  // namespace

void write_csv(std::ostream& out, const ExperimentConfig& cfg, const RunOutput& result) {
  out << "# rfasym results schema=1 config_hash=" << config_hash(cfg) << "\n";
  out << kCsvColumns << "\n";
  for (const RowResult& row : result.rows) {
    out << format_double(row.lambda) << ',' << format_double(row.eta) << ',' << row.m << ','
        << row.k << ',' << format_double(row.delta) << ',';
    if (row.theory) {
      out << format_double(row.theory->cost) << ',' << format_double(row.theory_gen) << ','
          << format_double(row.theory->q_star) << ',' << format_double(row.theory->beta_star)
          << ',' << format_double(row.theory->vartheta_star) << ','
          << format_double(row.theory->t_star) << ',';
    } else {
      out << ",,,,,,";
    }
    const EmpiricalSummary* f = row.feature ? &*row.feature : nullptr;
    if (f) {
      out << format_double(f->train_mean) << ',' << format_double(f->train_se) << ','
          << format_double(f->gen_mean) << ',' << format_double(f->gen_se) << ','
          << format_double(f->q_mean) << ',' << format_double(f->beta_mean) << ','
          << format_double(f->vartheta_mean) << ',';
    } else {
      out << ",,,,,,,";
    }
    if (row.gaussian) {
      out << format_double(row.gaussian->train_mean) << ','
          << format_double(row.gaussian->train_se) << ','
          << format_double(row.gaussian->gen_mean) << ',' << format_double(row.gaussian->gen_se)
          << ',';
    } else {
      out << ",,,,";
    }
    out << row.trials_ok << ',' << row.trials_failed << "\n";
  }
}

void write_jsonl(std::ostream& out, const ExperimentConfig& cfg, const RunOutput& result) {
  const std::string hash = config_hash(cfg);
  for (const RowResult& row : result.rows) {
    nlohmann::json j;
    j["schema"] = 1;
    j["config_hash"] = hash;
    j["lambda"] = row.lambda;
    j["eta"] = row.eta;
    j["m"] = row.m;
    j["k"] = row.k;
    j["delta"] = row.delta;
    if (row.theory) {
      j["theory_train"] = row.theory->cost;
      j["theory_gen"] = row.theory_gen;
      j["theory_q"] = row.theory->q_star;
      j["theory_beta"] = row.theory->beta_star;
      j["theory_vartheta"] = row.theory->vartheta_star;
      j["theory_t"] = std::isinf(row.theory->t_star) ? "inf"
                                                     : nlohmann::json(row.theory->t_star);
    }
    if (row.feature) {
      j["emp_train_mean"] = row.feature->train_mean;
      j["emp_train_se"] = row.feature->train_se;
      j["emp_gen_mean"] = row.feature->gen_mean;
      j["emp_gen_se"] = row.feature->gen_se;
      j["emp_q_mean"] = row.feature->q_mean;
      j["emp_beta_mean"] = row.feature->beta_mean;
      j["emp_vartheta_mean"] = row.feature->vartheta_mean;
    }
    if (row.gaussian) {
      j["gauss_train_mean"] = row.gaussian->train_mean;
      j["gauss_train_se"] = row.gaussian->train_se;
      j["gauss_gen_mean"] = row.gaussian->gen_mean;
      j["gauss_gen_se"] = row.gaussian->gen_se;
    }
    j["trials_ok"] = row.trials_ok;
    j["trials_failed"] = row.trials_failed;
    out << j.dump() << "\n";
  }
}

}  // namespace rfasym
