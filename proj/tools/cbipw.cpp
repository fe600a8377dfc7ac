// Command-line surface: estimate | simulate | diagnose | oracle-ate.
//
// Configuration is a small `key = value` file with [data], [priors], [mcmc]
// and [study] sections; unknown sections or keys are rejected. Every run
// writes a manifest.txt recording the tool version, seed and config hash.
// Outputs are deterministic given (input files, config, seed): machine CSVs
// carry 17 significant digits, human summaries 3-4.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbipw/config.hpp"
#include "cbipw/csv.hpp"
#include "cbipw/estimators.hpp"
#include "cbipw/gbayes.hpp"
#include "cbipw/metrics.hpp"
#include "cbipw/optimize.hpp"
#include "cbipw/pcic.hpp"
#include "cbipw/simulate.hpp"

namespace {

using namespace cbipw;

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  for (char c : s) {
    if (c == ',') {
      out.push_back(detail::trim(item));
      item.clear();
    } else {
      item += c;
    }
  }
  item = detail::trim(item);
  if (!item.empty() || !out.empty()) out.push_back(item);
  return out;
}

double to_double(const std::string& v, const std::string& what) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw std::runtime_error("config: '" + v + "' is not a number for " + what);
  return x;
}

long to_long(const std::string& v, const std::string& what) {
  const double x = to_double(v, what);
  const long l = static_cast<long>(x);
  if (static_cast<double>(l) != x)
    throw std::runtime_error("config: '" + v + "' is not an integer for " + what);
  return l;
}

bool to_bool(const std::string& v, const std::string& what) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config: '" + v + "' is not a boolean for " + what);
}

const std::map<std::string, std::set<std::string>> kConfigSchema = {
    {"data",
     {"csv", "outcome", "treatment", "covariates", "missing", "basis", "standardize"}},
    {"priors", {"lambda_shape", "lambda_rate", "theta_prior_mean", "theta_prior_sd"}},
    {"mcmc",
     {"draws", "burn_in", "thinning", "seed", "backend", "omega_grid", "proposal_scale"}},
    {"study",
     {"scenario", "n", "replications", "adjustment", "methods", "seed", "threads", "tau0",
      "level", "cv_folds", "cv_lambda_min", "cv_lambda_max", "cv_lambda_count"}},
};

Priors priors_from_config(const ConfigFile& cfg) {
  Priors priors;
  if (auto v = cfg.get("priors", "lambda_shape")) priors.lambda.shape = to_double(*v, "lambda_shape");
  if (auto v = cfg.get("priors", "lambda_rate")) priors.lambda.rate = to_double(*v, "lambda_rate");
  double mean = 0.0, sd = 100.0;
  if (auto v = cfg.get("priors", "theta_prior_mean")) mean = to_double(*v, "theta_prior_mean");
  if (auto v = cfg.get("priors", "theta_prior_sd")) sd = to_double(*v, "theta_prior_sd");
  if (!(priors.lambda.shape > 0.0) || !(priors.lambda.rate > 0.0) || !(sd > 0.0))
    throw std::runtime_error("config: prior parameters must be positive");
  priors.theta1 = {mean, 1.0 / (sd * sd)};
  priors.theta0 = priors.theta1;
  return priors;
}

McmcOptions mcmc_from_config(const ConfigFile& cfg) {
  McmcOptions m;
  if (auto v = cfg.get("mcmc", "draws")) m.draws = static_cast<int>(to_long(*v, "draws"));
  if (auto v = cfg.get("mcmc", "burn_in")) m.burn_in = static_cast<int>(to_long(*v, "burn_in"));
  if (auto v = cfg.get("mcmc", "thinning")) m.thinning = static_cast<int>(to_long(*v, "thinning"));
  if (auto v = cfg.get("mcmc", "seed")) m.seed = static_cast<std::uint64_t>(to_long(*v, "seed"));
  if (auto v = cfg.get("mcmc", "proposal_scale"))
    m.proposal_scale = to_double(*v, "proposal_scale");
  if (auto v = cfg.get("mcmc", "backend")) {
    if (*v == "adaptive-metropolis")
      m.backend = SamplerBackend::adaptive_metropolis;
    else if (*v == "loss-likelihood-bootstrap")
      m.backend = SamplerBackend::loss_likelihood_bootstrap;
    else
      throw std::runtime_error("config: unknown sampler backend '" + *v + "'");
  }
  return m;
}

std::vector<double> omega_grid_from_config(const ConfigFile& cfg) {
  if (auto v = cfg.get("mcmc", "omega_grid")) {
    std::vector<double> grid;
    for (const auto& item : split_list(*v)) grid.push_back(to_double(item, "omega_grid"));
    return grid;
  }
  return default_omega_grid();
}

struct LoadedData {
  Dataset ds;
  CsvSchema schema;
  BalanceBasis basis;
};

LoadedData data_from_config(const ConfigFile& cfg) {
  const auto csv = cfg.get("data", "csv");
  const auto outcome = cfg.get("data", "outcome");
  const auto treatment = cfg.get("data", "treatment");
  const auto covariates = cfg.get("data", "covariates");
  if (!csv || !outcome || !treatment || !covariates)
    throw std::runtime_error("config: [data] needs csv, outcome, treatment, covariates");
  LoadedData out;
  out.schema.outcome = *outcome;
  out.schema.treatment = *treatment;
  out.schema.covariates = split_list(*covariates);
  if (out.schema.covariates.empty())
    throw std::runtime_error("config: covariate list is empty");
  if (auto v = cfg.get("data", "missing")) out.schema.missing = *v;
  out.ds = load_csv(*csv, out.schema);

  bool standardize = true;
  if (auto v = cfg.get("data", "standardize")) standardize = to_bool(*v, "standardize");
  std::string basis_kind = "raw";
  if (auto v = cfg.get("data", "basis")) basis_kind = *v;
  std::vector<BasisTerm> spec;
  if (basis_kind == "raw")
    spec = raw_terms(out.ds.p());
  else if (basis_kind == "raw+squares")
    spec = raw_and_square_terms(out.ds.p());
  else
    throw std::runtime_error("config: unknown basis '" + basis_kind +
                             "' (expected raw or raw+squares)");
  out.basis = build_balance_basis(out.ds.x, spec, standardize);
  return out;
}

void require_complete(const Dataset& ds, const std::string& command) {
  if (!ds.r) return;
  for (int r : *ds.r)
    if (r == 0)
      throw std::runtime_error(command +
                               ": data has missing rows (indicator 0); this command requires "
                               "complete data");
}

void write_manifest(const std::filesystem::path& dir, RunManifest manifest) {
  manifest.created_utc = now_utc();
  std::ofstream out(dir / "manifest.txt", std::ios::binary);
  out << manifest.to_text();
}

std::string basis_column_name(const BalanceBasis& basis, const CsvSchema& schema,
                              std::size_t term_index) {
  const BasisTerm& t = basis.terms[term_index];
  const auto name = [&](std::size_t c) {
    return c < schema.covariates.size() ? schema.covariates[c] : "x" + std::to_string(c + 1);
  };
  switch (t.kind) {
    case TermKind::raw: return name(t.col_a);
    case TermKind::square: return name(t.col_a) + "^2";
    case TermKind::interaction: return name(t.col_a) + "*" + name(t.col_b);
  }
  return "?";
}

// ---------------------------------------------------------------------------

int cmd_estimate(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                 std::optional<double> omega_flag, const std::string& out_dir) {
  const ConfigFile cfg = load_config(config_path);
  validate_known_keys(cfg, kConfigSchema);
  LoadedData data = data_from_config(cfg);
  require_complete(data.ds, "estimate");
  validate_dataset(data.ds);

  const Priors priors = priors_from_config(cfg);
  McmcOptions mcmc = mcmc_from_config(cfg);
  if (seed_flag) mcmc.seed = *seed_flag;
  std::vector<double> grid =
      omega_flag ? std::vector<double>{*omega_flag} : omega_grid_from_config(cfg);

  const Matrix g = basis_matrix(data.basis, data.ds.x);
  const OmegaSelection sel = select_omega(data.ds, g, priors, grid, mcmc);
  const PosteriorDraws& draws = sel.draws;
  const std::size_t draw_count = draws.draw_count();

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  {
    CsvWriter out((dir / "pcic.csv").string());
    out.row({"omega", "pcic", "selected"});
    for (const auto& r : sel.table.rows)
      out.row({format_full(r.omega), format_full(r.pcic), r.selected ? "1" : "0"});
  }
  {
    CsvWriter out((dir / "draws.csv").string());
    std::vector<std::string> header{"draw", "lambda"};
    for (std::size_t j = 0; j < draws.alpha.cols(); ++j)
      header.push_back("alpha_" + std::to_string(j));
    header.insert(header.end(), {"theta1", "theta0", "tau"});
    out.row(header);
    for (std::size_t r = 0; r < draw_count; ++r) {
      std::vector<std::string> cells{std::to_string(r + 1), format_full(draws.lambda[r])};
      for (std::size_t j = 0; j < draws.alpha.cols(); ++j)
        cells.push_back(format_full(draws.alpha(r, j)));
      cells.push_back(format_full(draws.theta1[r]));
      cells.push_back(format_full(draws.theta0[r]));
      cells.push_back(format_full(draws.theta1[r] - draws.theta0[r]));
      out.row(cells);
    }
  }

  // SMD of the basis columns before and after weighting by the
  // posterior-mean propensity.
  Vector alpha_mean(draws.alpha.cols(), 0.0);
  for (std::size_t r = 0; r < draw_count; ++r)
    for (std::size_t j = 0; j < draws.alpha.cols(); ++j) alpha_mean[j] += draws.alpha(r, j);
  for (double& v : alpha_mean) v /= static_cast<double>(draw_count);
  const Vector e_mean = fitted_propensities(alpha_mean, g);
  Matrix basis_cols(data.ds.n(), data.basis.penalized());
  for (std::size_t i = 0; i < data.ds.n(); ++i)
    for (std::size_t j = 0; j < data.basis.penalized(); ++j) basis_cols(i, j) = g(i, j + 1);
  const Vector smd_before = smd_columns(basis_cols, data.ds.a);
  const Vector smd_after = smd_columns(basis_cols, data.ds.a, ipw_weights(e_mean, data.ds.a));
  {
    CsvWriter out((dir / "smd.csv").string());
    out.row({"variable", "before", "after"});
    for (std::size_t j = 0; j < data.basis.penalized(); ++j)
      out.row({basis_column_name(data.basis, data.schema, j), format_full(smd_before[j]),
               format_full(smd_after[j])});
  }

  const Vector tau = draws.tau();
  const auto summarize = [&](const Vector& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size()));
    const auto [lo, hi] = credible_interval(v, 0.95);
    return std::array<double, 4>{mean, sd, lo, hi};
  };
  const auto s1 = summarize(draws.theta1);
  const auto s0 = summarize(draws.theta0);
  const auto st = summarize(tau);

  {
    std::ofstream out(dir / "summary.txt", std::ios::binary);
    const double sd1 = std::sqrt(1.0 / priors.theta1.precision);
    out << "generalized-Bayes covariate-balancing IPW estimate\n";
    out << "data: n=" << data.ds.n() << " treated=" << data.ds.treated_count()
        << " basis_columns=" << data.basis.columns() << "\n";
    out << "priors: lambda ~ Gam(" << format_short(priors.lambda.shape) << ", "
        << format_short(priors.lambda.rate) << "), alpha ~ DoubleExponential(0, 1/lambda), "
        << "theta_k ~ N(" << format_short(priors.theta1.mean) << ", " << format_short(sd1)
        << "^2)\n";
    out << "omega grid:";
    for (const auto& r : sel.table.rows) out << ' ' << format_short(r.omega);
    out << "\nselected omega (minimum PCIC): " << format_short(sel.omega) << "\n";
    out << "draws: " << draw_count << "  acceptance rate: " << format_short(draws.acceptance_rate)
        << "  clamp events: " << draws.clamp_events << "\n";
    out << "posterior summaries (mean, sd, 95% credible interval):\n";
    out << "  theta1: " << format_short(s1[0]) << "  " << format_short(s1[1]) << "  ["
        << format_short(s1[2]) << ", " << format_short(s1[3]) << "]\n";
    out << "  theta0: " << format_short(s0[0]) << "  " << format_short(s0[1]) << "  ["
        << format_short(s0[2]) << ", " << format_short(s0[3]) << "]\n";
    out << "  tau:    " << format_short(st[0]) << "  " << format_short(st[1]) << "  ["
        << format_short(st[2]) << ", " << format_short(st[3]) << "]\n";
    for (const auto& w : sel.warnings) out << "warning: " << w << "\n";
    for (const auto& w : draws.warnings) out << "warning: " << w << "\n";
  }

  RunManifest manifest;
  manifest.command = "estimate";
  manifest.config_hash = config_hash(cfg);
  manifest.seed = mcmc.seed;
  manifest.parameters = {{"omega_override", omega_flag ? format_full(*omega_flag) : ""},
                         {"draws", std::to_string(mcmc.draws)},
                         {"burn_in", std::to_string(mcmc.burn_in)}};
  write_manifest(dir, manifest);

  std::cout << "estimate: tau = " << format_short(st[0]) << " [" << format_short(st[2]) << ", "
            << format_short(st[3]) << "] (omega " << format_short(sel.omega) << ", outputs in "
            << out_dir << ")\n";
  return 0;
}

MethodSpec parse_method(const std::string& name) {
  if (name == "logit") return make_method(MethodKind::logit);
  if (name == "cbps") return make_method(MethodKind::cbps);
  if (name == "rcal-cv") return make_method(MethodKind::rcal_cv);
  if (name == "brcal-pcic") return make_method(MethodKind::brcal_pcic);
  if (name.rfind("rcal-", 0) == 0) {
    MethodSpec m = make_method(MethodKind::rcal_fixed, to_double(name.substr(5), name));
    m.label = name;
    return m;
  }
  if (name.rfind("brcal-", 0) == 0) {
    MethodSpec m = make_method(MethodKind::brcal_fixed, to_double(name.substr(6), name));
    m.label = name;
    return m;
  }
  throw std::runtime_error("unknown method '" + name +
                           "' (expected logit, cbps, rcal-cv, rcal-<lambda>, brcal-pcic, "
                           "brcal-<omega>)");
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                 const std::string& out_dir) {
  const ConfigFile cfg = load_config(config_path);
  validate_known_keys(cfg, kConfigSchema);

  StudyConfig study;
  if (auto v = cfg.get("study", "scenario")) study.scenario = scenario_from_string(*v);
  if (auto v = cfg.get("study", "n")) study.n = static_cast<std::size_t>(to_long(*v, "n"));
  if (auto v = cfg.get("study", "replications"))
    study.replications = static_cast<int>(to_long(*v, "replications"));
  if (auto v = cfg.get("study", "adjustment")) {
    if (*v == "confounders")
      study.adjustment = AdjustmentSet::confounders;
    else if (*v == "predictors")
      study.adjustment = AdjustmentSet::predictors;
    else
      throw std::runtime_error("config: unknown adjustment set '" + *v + "'");
  }
  const auto methods = cfg.get("study", "methods");
  if (!methods) throw std::runtime_error("config: [study] needs a methods list");
  for (const auto& name : split_list(*methods)) study.methods.push_back(parse_method(name));
  if (auto v = cfg.get("study", "seed"))
    study.master_seed = static_cast<std::uint64_t>(to_long(*v, "seed"));
  if (seed_flag) study.master_seed = *seed_flag;
  if (auto v = cfg.get("study", "threads")) study.threads = static_cast<int>(to_long(*v, "threads"));
  if (auto v = cfg.get("study", "tau0")) study.tau0 = to_double(*v, "tau0");
  if (auto v = cfg.get("study", "level")) study.interval_level = to_double(*v, "level");
  if (auto v = cfg.get("study", "cv_folds")) study.cv_folds = static_cast<int>(to_long(*v, "cv_folds"));

  study.priors = priors_from_config(cfg);
  McmcOptions base = StudyConfig::desk_scale_mcmc();
  if (cfg.find("mcmc")) {
    const McmcOptions parsed = mcmc_from_config(cfg);
    base = parsed;
    if (!cfg.get("mcmc", "draws")) base.draws = 1000;
    if (!cfg.get("mcmc", "burn_in")) base.burn_in = 1000;
  }
  study.mcmc = base;
  study.omega_grid = omega_grid_from_config(cfg);

  const StudyResult result = run_study(study);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  {
    CsvWriter out((dir / "metrics.csv").string());
    out.row({"scenario", "method", "n", "bias_x100", "rmse_x100", "cp", "avl", "br", "rr",
             "replications", "failures"});
    for (const MetricsRow& row : result.rows)
      out.row({row.scenario, row.method, std::to_string(row.n), format_full(row.bias * 100.0),
               format_full(row.rmse * 100.0), format_full(row.cp), format_full(row.avl),
               row.br ? format_full(*row.br) : "", row.rr ? format_full(*row.rr) : "",
               std::to_string(row.replications), std::to_string(row.failures)});
  }
  {
    CsvWriter out((dir / "estimates.csv").string());
    out.row({"method", "replication", "ok", "tau_hat", "ci_lo", "ci_hi"});
    for (std::size_t mi = 0; mi < result.raw.size(); ++mi)
      for (const RawEstimate& est : result.raw[mi])
        out.row({study.methods[mi].label, std::to_string(est.replication + 1),
                 est.ok ? "1" : "0", est.ok ? format_full(est.tau_hat) : "",
                 est.ok ? format_full(est.interval.lo) : "",
                 est.ok ? format_full(est.interval.hi) : ""});
  }

  RunManifest manifest;
  manifest.command = "simulate";
  manifest.config_hash = config_hash(cfg);
  manifest.seed = study.master_seed;
  manifest.parameters = {{"scenario", to_string(study.scenario)},
                         {"n", std::to_string(study.n)},
                         {"replications", std::to_string(study.replications)},
                         {"methods", *methods}};
  write_manifest(dir, manifest);

  std::cout << "simulate: " << result.rows.size() << " method rows over "
            << study.replications << " replications (outputs in " << out_dir << ")\n";
  return 0;
}

int cmd_diagnose(const std::string& config_path, const std::string& method_name,
                 std::optional<double> lambda_flag, const std::string& out_dir) {
  const ConfigFile cfg = load_config(config_path);
  validate_known_keys(cfg, kConfigSchema);
  LoadedData data = data_from_config(cfg);
  require_complete(data.ds, "diagnose");
  validate_dataset(data.ds);
  const Matrix g = basis_matrix(data.basis, data.ds.x);

  Vector e;
  std::string fitted_with = method_name;
  if (method_name == "logit")
    e = fit_logistic_mle(data.ds, g).e;
  else if (method_name == "cbps")
    e = fit_cbps_exact(data.ds, g).e;
  else if (method_name == "rcal") {
    const double lambda = lambda_flag.value_or(0.05);
    e = fit_rcal(data.ds, g, lambda).e;
    fitted_with = "rcal (lambda " + format_short(lambda) + ")";
  } else if (method_name == "none") {
    // weights stay uniform; "after" equals "before"
  } else {
    throw std::runtime_error("diagnose: unknown method '" + method_name +
                             "' (expected logit, cbps, rcal, none)");
  }

  Matrix basis_cols(data.ds.n(), data.basis.penalized());
  for (std::size_t i = 0; i < data.ds.n(); ++i)
    for (std::size_t j = 0; j < data.basis.penalized(); ++j) basis_cols(i, j) = g(i, j + 1);
  const Vector before = smd_columns(basis_cols, data.ds.a);
  const Vector after = e.empty()
                           ? before
                           : smd_columns(basis_cols, data.ds.a, ipw_weights(e, data.ds.a));

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  {
    CsvWriter out((dir / "smd.csv").string());
    out.row({"variable", "before", "after"});
    for (std::size_t j = 0; j < data.basis.penalized(); ++j)
      out.row({basis_column_name(data.basis, data.schema, j), format_full(before[j]),
               format_full(after[j])});
  }

  std::cout << "covariate balance (" << fitted_with << ")\n";
  const auto bar = [](double smd_value) {
    const int len = std::min(40, static_cast<int>(std::abs(smd_value) * 100.0));
    return std::string(static_cast<std::size_t>(len), '#');
  };
  for (std::size_t j = 0; j < data.basis.penalized(); ++j) {
    const std::string name = basis_column_name(data.basis, data.schema, j);
    std::printf("  %-12s before %+7.3f %s\n", name.c_str(), before[j], bar(before[j]).c_str());
    std::printf("  %-12s after  %+7.3f %s\n", "", after[j], bar(after[j]).c_str());
  }

  RunManifest manifest;
  manifest.command = "diagnose";
  manifest.config_hash = config_hash(cfg);
  manifest.seed = 0;
  manifest.parameters = {{"method", method_name}};
  write_manifest(dir, manifest);
  return 0;
}

int cmd_oracle_ate(std::uint64_t m, std::uint64_t seed) {
  Rng rng(seed);
  const AteOracle oracle = true_ate_oracle(m, rng);
  std::cout << "tau0 = " << format_short(oracle.tau0) << " (mc_se " << format_short(oracle.mc_se)
            << ")\n";
  std::cout << "tau0_full = " << format_full(oracle.tau0) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariate-balancing IPW estimation with generalized-Bayes calibration"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", method = "logit";
  std::optional<std::uint64_t> seed_flag;
  std::optional<double> omega_flag, lambda_flag;
  std::uint64_t oracle_m = 10000000, oracle_seed = 1;

  auto* est = app.add_subcommand("estimate", "fit the generalized-Bayes estimator on a CSV");
  est->add_option("--config", config_path, "config file")->required();
  est->add_option("--seed", seed_flag, "override the MCMC seed");
  est->add_option("--omega", omega_flag, "fix the learning rate (bypasses PCIC selection)");
  est->add_option("--out-dir", out_dir, "output directory");

  auto* sim = app.add_subcommand("simulate", "run a replication study on synthetic data");
  sim->add_option("--config", config_path, "config file")->required();
  sim->add_option("--seed", seed_flag, "override the master seed");
  sim->add_option("--out-dir", out_dir, "output directory");

  auto* diag = app.add_subcommand("diagnose", "covariate-balance diagnostics for a weighting method");
  diag->add_option("--config", config_path, "config file")->required();
  diag->add_option("--method", method, "logit | cbps | rcal | none");
  diag->add_option("--lambda", lambda_flag, "penalty for rcal");
  diag->add_option("--out-dir", out_dir, "output directory");

  auto* oracle = app.add_subcommand("oracle-ate", "Monte Carlo value of the true ATE");
  oracle->add_option("--m", oracle_m, "Monte Carlo draws");
  oracle->add_option("--seed", oracle_seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed()) return cmd_estimate(config_path, seed_flag, omega_flag, out_dir);
    if (sim->parsed()) return cmd_simulate(config_path, seed_flag, out_dir);
    if (diag->parsed()) return cmd_diagnose(config_path, method, lambda_flag, out_dir);
    if (oracle->parsed()) return cmd_oracle_ate(oracle_m, oracle_seed);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
