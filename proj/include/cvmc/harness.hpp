#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvmc/basis.hpp"
#include "cvmc/estimators.hpp"
#include "cvmc/integrands.hpp"
#include "cvmc/rng.hpp"

namespace cvmc {

// Bad configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Filesystem/parse failure (CLI exit code 3).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// CVMC_THREADS caps worker threads; defaults to hardware concurrency.
int thread_count();

struct ExperimentConfig {
  std::string integrand = "phi";  // phi | f | g
  int d = 3;
  int j = 1;
  BasisFamily family = BasisFamily::LegendreShifted;
  int k = 12;
  std::vector<int> deg_list{3};
  int max_active = -1;
  Eigen::Index n = 10000;
  Eigen::Index N = -1;  // subsample size; required by lasso/lslasso methods
  int replicates = 100;
  std::uint64_t master_seed = 1;
  std::vector<std::string> methods{"mc", "ols"};
  Selector selector = Selector::Dichotomic;
  std::string output;  // path prefix; empty = keep in memory

  std::string to_json() const;
};

ExperimentConfig experiment_config_from_json(const std::string& text);

struct MethodRow {
  std::string method;
  Eigen::Index m = 0;
  std::vector<double> estimates;  // one per replicate
  double mse = 0;
  double efficiency = 0;  // mse(mc)/mse; NaN when mc was not run
  double wall_ms = 0;     // total across replicates
};

struct ExperimentReport {
  std::string config_json;
  double true_value = 0;
  std::vector<MethodRow> rows;

  std::string to_json() const;
};

// Paired design: per replicate r one batch from stream master_seed ^ r, every
// method estimated on it. Replicates run on thread_count() workers; output is
// bitwise independent of the parallelism degree.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// mc | ols | lasso | lslasso | lslassox on a prepared batch. halton is not
// dispatchable here (it owns its point set).
EstimateResult run_method(const std::string& method, const SampleBatch& batch, Eigen::Index N,
                          Selector selector, const LassoOptions& opts = {});

// Interaction controls for the evidence studies: tensor Legendre with at most
// `order` active coordinates. deg_cap limits total degree (default order*k,
// which yields m = kd for order 1 and m = kd + k^2 d(d-1)/2 for order 2).
BasisSpec build_interaction_basis(int d, int k, int order, int deg_cap = -1);

struct BayesConfig {
  std::string dataset = "capture";  // capture | sonar
  std::string data_path;            // sonar CSV
  int k = 10;
  int order = 2;
  std::vector<int> deg_list{6};
  Eigen::Index n = 5000;
  Eigen::Index N = 1000;
  int replicates = 50;
  std::uint64_t master_seed = 1;
  std::vector<std::string> methods{"mc", "ols", "lasso", "lslassox"};
  Selector selector = Selector::Dichotomic;
  Eigen::Index n_gold = 10000000;
  std::string output;

  std::string to_json() const;
};

BayesConfig bayes_config_from_json(const std::string& text);

// Reference evidence value: importance sampled on a half-uniform,
// half-Gaussian mixture adapted around the pilot mode, spending n_gold
// evaluations in total. The uniform mixture half bounds the weights, so the
// standard error can never blow past plain Monte Carlo at the same size.
struct GoldStandard {
  double log_z = 0;    // log evidence, prior constant folded in
  double shift_c = 0;  // log-shift from the pilot sample
  double rel_se = 0;   // sampling standard error relative to the estimate
  Eigen::Index n_gold = 0;
  std::uint64_t seed = 0;
};

struct BayesReport {
  std::string config_json;
  GoldStandard gold;
  std::vector<MethodRow> rows;  // estimates are evidence ratios Zhat/Z*

  std::string to_json() const;
};

BayesReport run_bayes(const BayesConfig& cfg);

// prefix_data.csv (method,m,replicate,estimate,abs_error),
// prefix_summary.csv (method,m,mse,efficiency), prefix.json (everything,
// including wall times). format: "csv" writes the two CSVs, "json" the JSON.
void emit_report(const ExperimentReport& report, const std::string& format,
                 const std::string& prefix);
void emit_report(const BayesReport& report, const std::string& format,
                 const std::string& prefix);

}  // namespace cvmc
