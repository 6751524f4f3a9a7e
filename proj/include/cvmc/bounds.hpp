#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cvmc/basis.hpp"
#include "cvmc/estimators.hpp"

namespace cvmc {

// Every symbol of the concentration bounds in one place. Optional fields stay
// unset when a bound does not need them.
struct BoundParams {
  double tau = 0;    // sub-Gaussian variance factor of the residual
  double n = 0;      // sample size (real-valued: formulas only)
  double m = 0;      // number of controls
  double N = 0;      // subsample size (two-stage estimator)
  double delta = 0;  // confidence level in (0,1)
  std::optional<double> gamma;        // smallest Gram eigenvalue
  std::optional<double> gamma_star;   // restricted eigenvalue
  std::optional<double> gamma_2star;  // active-block smallest eigenvalue
  std::optional<double> u_h;          // sup bound on any control
  std::optional<double> b;            // B = sup_x h' G^-1 h
  std::optional<double> b_star;       // active-set analogue of B
  std::optional<double> ell_star;     // |S*|
  std::optional<double> lambda;
  std::optional<double> beta_min;     // min_{k in S*} |beta*_k|
};

// sqrt(2 log(2/delta)) tau / sqrt(n)
double oracle_bound(const BoundParams& p);

struct OlsBound {
  double bound = 0;
  bool n_admissible = false;
  double n_required = 0;  // max(18 B log(4m/d), 75 m log(4/d))
};
OlsBound ols_bound(const BoundParams& p);

struct LassoBound {
  double bound_general = 0;      // with the supplied lambda
  double bound_at_min_lambda = 0;  // lambda at its lower bound, constant 476
  bool admissible = false;
  double n_required = 0;
  double lambda_min = 0;  // 7 U_h sqrt(log(8m/d)) tau / sqrt(n)
};
LassoBound lasso_bound(const BoundParams& p);

struct LambdaInterval {
  double lo = 0;
  double hi = 0;
  bool nonempty = false;
};
// Support-recovery window: [13 U_h sqrt(log(10m/d)) tau/sqrt(n),
//                           gamma** beta_min / (3 sqrt(ell*))].
LambdaInterval lambda_interval(const BoundParams& p);

struct LslassoBound {
  double bound = 0;
  bool admissible = false;
  double n_required = 0;      // on N
  double lambda_lo = 0;       // window endpoints for the subsample fit
  double lambda_hi = 0;
};
LslassoBound lslasso_bound(const BoundParams& p);

// B via the chain m <= B <= m u_h^2 / gamma when not supplied directly.
struct BResolution {
  double value = 0;
  std::string source;  // "supplied" or "chain m*u_h^2/gamma"
};
BResolution resolve_b(const BoundParams& p);

// Exact B for a basis: closed-form corner value for tensor Legendre
// (sup attained at x = (1,..,1)), 2m for Fourier; `witness` is the max of
// h' G^-1 h over a random grid, a lower confirmation of `exact`.
struct BCertificate {
  double exact = 0;
  double witness = 0;
};
BCertificate exact_b(const BasisSpec& spec, int grid_points = 100000, std::uint64_t seed = 1);

enum class BoundKind { Ols, Lasso, Lslasso };

// Synthetic model for coverage runs: f = alpha + beta*' h + a h_next where
// h_next is the next basis function outside the family, so the residual is
// bounded by `a` (tau = a), has zero mean, and is orthogonal to every control.
struct CoverageModel {
  BasisSpec spec;
  Eigen::VectorXd beta_star;
  double alpha = 0;
  double noise_amp = 0;
  Eigen::Index n = 0;
  Eigen::Index N = 0;       // two-stage only
  double delta = 0.1;
  double lambda = 0;        // fixed lambda for the LASSO/LSLASSO fits
};

struct Coverage {
  double fraction = 0;
  double wilson_lo = 0;
  double wilson_hi = 0;
  double bound = 0;
  int replicates = 0;
};

// Fraction of replicates with |alpha_hat - alpha| <= theorem bound. Throws if
// the theorem's admissibility flag is false for the configuration.
Coverage empirical_coverage(const CoverageModel& model, BoundKind kind, int replicates,
                            std::uint64_t seed);

// Half-width helper shared with the acceptance checks (95% Wilson interval).
double wilson_half_width(double fraction, int trials);

std::string bounds_report_json(const BoundParams& p);
BoundParams bound_params_from_json(const std::string& text);

}  // namespace cvmc
