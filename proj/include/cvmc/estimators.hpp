#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "cvmc/basis.hpp"

namespace cvmc {

// One replicate's worth of data: points, integrand values, design matrix, and
// the column-centered forms every estimator works on.
struct SampleBatch {
  Eigen::MatrixXd X;          // n x d
  Eigen::VectorXd f_vals;     // n
  Eigen::MatrixXd H;          // n x m
  Eigen::VectorXd f_c;        // f_vals - mean
  Eigen::MatrixXd H_c;        // H with column means removed
  Eigen::VectorXd col_means;  // P_n(h)
  Eigen::VectorXd col_norms;  // ||H_c col||_2
  double f_mean = 0;

  Eigen::Index n() const { return f_vals.size(); }
  Eigen::Index m() const { return H.cols(); }

  static SampleBatch build(Eigen::MatrixXd X, Eigen::VectorXd f_vals, const BasisSpec& spec);
  // For tests and callers that already hold a design matrix.
  static SampleBatch from_design(Eigen::MatrixXd X, Eigen::VectorXd f_vals, Eigen::MatrixXd H);
};

// First N rows, re-centered on themselves.
SampleBatch subbatch(const SampleBatch& batch, Eigen::Index N);

enum class Method { MC, Oracle, OLS, Lasso, LSLasso };

struct EstimateResult {
  double alpha = 0;
  Eigen::VectorXd beta;                  // full-m coordinates, zeros off the active set
  std::vector<Eigen::Index> active_set;  // sorted {j : beta[j] != 0}
  Method method = Method::MC;
  int iterations = 0;
  std::optional<double> lambda_used;
  std::optional<Eigen::Index> subsample_N;
  bool rank_deficient = false;     // OLS hit the minimal-norm path
  bool mc_fallback = false;        // empty LASSO support, degraded to vanilla MC
  bool range_unreachable = false;  // dichotomic target support range not reachable

  std::string to_json() const;
};

EstimateResult mc_estimate(const Eigen::Ref<const Eigen::VectorXd>& f_vals);

EstimateResult oracle_estimate(const Eigen::Ref<const Eigen::VectorXd>& f_vals,
                               const Eigen::Ref<const Eigen::MatrixXd>& H,
                               const Eigen::Ref<const Eigen::VectorXd>& beta_star);

EstimateResult ols_estimate(const SampleBatch& batch);

inline double soft_threshold(double z, double lambda) {
  double a = std::abs(z) - lambda;
  return a > 0 ? (z > 0 ? a : -a) : 0.0;
}

struct LassoOptions {
  double tol = 1e-7;      // max coordinate change per sweep, standardized scale
  int max_sweeps = 1000;
};

struct LassoFit {
  Eigen::VectorXd beta;      // original column scale
  Eigen::VectorXd beta_std;  // standardized scale (column norm / sqrt(n) divided out)
  int sweeps = 0;
};

// Cyclic coordinate descent for (1/2n)||f_c - H_c b||^2 + lambda |b|_1 on
// empirically standardized columns. Zero-norm columns are skipped. `warm_std`
// is a starting point in standardized coordinates.
LassoFit lasso_cd(const SampleBatch& batch, double lambda, const LassoOptions& opts = {},
                  const Eigen::VectorXd* warm_std = nullptr);

EstimateResult lasso_estimate(const SampleBatch& batch, double lambda,
                              const LassoOptions& opts = {});

// Smallest lambda whose LASSO solution on the standardized first-N-rows
// problem is identically zero.
double lambda_max(const SampleBatch& batch, Eigen::Index N);

// 50 log-spaced points from lmax down to 1e-4 lmax (descending).
std::vector<double> default_lambda_grid(double lmax, int points = 50);

struct SelectionResult {
  Eigen::VectorXd beta_N;  // subsample solution, original scale
  double lambda = 0;
  int steps = 0;             // lasso solves performed
  bool range_unreachable = false;
};

// Integer target window [floor(c1 sqrt(n)), floor(c2 sqrt(n))] for the
// selected support size.
std::pair<Eigen::Index, Eigen::Index> dichotomic_range(Eigen::Index n, double c1 = 3,
                                                       double c2 = 12);

// Algorithm: start at lambda_max on the N-subsample, halve while the support
// is below floor(c1 sqrt(n)), double while above floor(c2 sqrt(n)), then
// bisect geometrically between the last straddling pair.
SelectionResult dichotomic_search(const SampleBatch& batch, Eigen::Index N, double c1 = 3,
                                  double c2 = 12, int max_steps = 60,
                                  const LassoOptions& opts = {});

// K contiguous folds on the N-subsample; per-lambda training fits, squared
// test error summed over folds; refit at the argmin on all N rows.
SelectionResult kfold_cv(const SampleBatch& batch, Eigen::Index N,
                         const std::vector<double>& grid, int K,
                         const LassoOptions& opts = {});

enum class Selector { Dichotomic, KFold };

// Two-stage estimator: LASSO support selection on the first N rows (lambda via
// `selector`), then OLS restricted to the selected columns on all n rows.
EstimateResult lslasso_estimate(const SampleBatch& batch, Eigen::Index N, Selector selector,
                                const LassoOptions& opts = {});

// Same two-stage shape with a caller-pinned lambda (coverage and
// support-recovery experiments).
EstimateResult lslasso_at_lambda(const SampleBatch& batch, Eigen::Index N, double lambda,
                                 const LassoOptions& opts = {});

}  // namespace cvmc
