#include "cvmc/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "cvmc/rng.hpp"

namespace cvmc {

namespace {

void require_core(const BoundParams& p) {
  if (!(p.delta > 0.0 && p.delta < 1.0))
    throw std::invalid_argument("bounds: delta must lie in (0,1)");
  if (!(p.n > 0.0)) throw std::invalid_argument("bounds: n must be positive");
  if (p.tau < 0.0) throw std::invalid_argument("bounds: tau must be nonnegative");
}

double require_opt(const std::optional<double>& v, const char* what) {
  if (!v) throw std::invalid_argument(std::string("bounds: missing parameter ") + what);
  return *v;
}

// B = sup_x h(x)' G^-1 h(x). The Gram matrix of a tensor family is diagonal,
// so this is a weighted sum of squared controls; Legendre attains it at the
// all-ones corner, the trigonometric family is bounded by twice its size.
double closed_form_b(const BasisSpec& spec) {
  if (spec.family == BasisFamily::Fourier) return 2.0 * static_cast<double>(spec.m());
  double total = 0.0;
  for (const auto& idx : spec.indices) {
    double w = 1.0;
    for (int degree : idx.degrees)
      if (degree > 0) w *= 2.0 * degree + 1.0;
    total += w;
  }
  return total;
}

double subset_b(const BasisSpec& spec, const std::vector<Eigen::Index>& support) {
  if (spec.family == BasisFamily::Fourier) return 2.0 * static_cast<double>(support.size());
  double total = 0.0;
  for (Eigen::Index j : support) {
    double w = 1.0;
    for (int degree : spec.indices[static_cast<std::size_t>(j)].degrees)
      if (degree > 0) w *= 2.0 * degree + 1.0;
    total += w;
  }
  return total;
}

double next_family_eval(const BasisSpec& spec, double x) {
  if (spec.family == BasisFamily::Fourier) return fourier_eval(spec.k + 1, x);
  return legendre_eval(spec.k + 1, x);
}

constexpr double kRelSlack = 1e-12;

}  // namespace

double oracle_bound(const BoundParams& p) {
  require_core(p);
  return std::sqrt(2.0 * std::log(2.0 / p.delta)) * p.tau / std::sqrt(p.n);
}

BResolution resolve_b(const BoundParams& p) {
  if (p.b) return {*p.b, "supplied"};
  if (p.m > 0.0 && p.u_h && p.gamma && *p.gamma > 0.0)
    return {p.m * (*p.u_h) * (*p.u_h) / *p.gamma, "chain m*u_h^2/gamma"};
  throw std::invalid_argument("bounds: cannot resolve B (need b, or m with u_h and gamma)");
}

OlsBound ols_bound(const BoundParams& p) {
  require_core(p);
  if (!(p.m > 0.0)) throw std::invalid_argument("bounds: m must be positive");
  double b = resolve_b(p).value;
  OlsBound r;
  r.n_required = std::max(18.0 * b * std::log(4.0 * p.m / p.delta),
                          75.0 * p.m * std::log(4.0 / p.delta));
  r.n_admissible = p.n >= r.n_required * (1.0 - kRelSlack);
  double first = std::sqrt(2.0 * std::log(8.0 / p.delta)) * p.tau / std::sqrt(p.n);
  double second = 58.0 *
                  std::sqrt(b * p.m * std::log(8.0 * p.m / p.delta) * std::log(4.0 / p.delta)) *
                  p.tau / p.n;
  r.bound = first + second;
  return r;
}

LassoBound lasso_bound(const BoundParams& p) {
  require_core(p);
  if (!(p.m > 0.0)) throw std::invalid_argument("bounds: m must be positive");
  double u_h = require_opt(p.u_h, "u_h");
  double gamma_star = require_opt(p.gamma_star, "gamma_star");
  double ell = require_opt(p.ell_star, "ell_star");
  if (!(gamma_star > 0.0)) throw std::invalid_argument("bounds: gamma_star must be positive");

  LassoBound r;
  double logm = std::log(8.0 * p.m / p.delta);
  r.lambda_min = 7.0 * u_h * std::sqrt(logm) * p.tau / std::sqrt(p.n);
  double xi = ell * u_h * u_h / gamma_star;
  r.n_required = std::max(8.0 * xi * xi * std::log(8.0 * p.m * p.m / p.delta),
                          128.0 * xi * logm);
  double first = std::sqrt(2.0 * std::log(8.0 / p.delta)) * p.tau / std::sqrt(p.n);
  double lam = p.lambda ? *p.lambda : r.lambda_min;
  r.bound_general = first + 68.0 * lam * ell * std::sqrt(logm) * u_h / (gamma_star * std::sqrt(p.n));
  r.bound_at_min_lambda = first + 476.0 * ell * u_h * u_h * logm * p.tau / (gamma_star * p.n);
  r.admissible = p.n >= r.n_required * (1.0 - kRelSlack) && lam >= r.lambda_min * (1.0 - kRelSlack);
  return r;
}

LambdaInterval lambda_interval(const BoundParams& p) {
  require_core(p);
  if (!(p.m > 0.0)) throw std::invalid_argument("bounds: m must be positive");
  double u_h = require_opt(p.u_h, "u_h");
  double gamma2 = require_opt(p.gamma_2star, "gamma_2star");
  double ell = require_opt(p.ell_star, "ell_star");
  double beta_min = require_opt(p.beta_min, "beta_min");
  if (!(ell > 0.0)) throw std::invalid_argument("bounds: ell_star must be positive");
  LambdaInterval w;
  w.lo = 13.0 * u_h * std::sqrt(std::log(10.0 * p.m / p.delta)) * p.tau / std::sqrt(p.n);
  w.hi = gamma2 * beta_min / (3.0 * std::sqrt(ell));
  w.nonempty = w.hi > 0.0 && w.lo <= w.hi;
  return w;
}

LslassoBound lslasso_bound(const BoundParams& p) {
  require_core(p);
  if (!(p.m > 0.0)) throw std::invalid_argument("bounds: m must be positive");
  if (!(p.N > 0.0)) throw std::invalid_argument("bounds: N must be positive");
  double b_star = require_opt(p.b_star, "b_star");
  double ell = require_opt(p.ell_star, "ell_star");
  double u_h = require_opt(p.u_h, "u_h");
  double gamma2 = require_opt(p.gamma_2star, "gamma_2star");
  double beta_min = require_opt(p.beta_min, "beta_min");
  if (!(gamma2 > 0.0)) throw std::invalid_argument("bounds: gamma_2star must be positive");
  if (!(ell > 0.0)) throw std::invalid_argument("bounds: ell_star must be positive");

  LslassoBound r;
  double first = std::sqrt(2.0 * std::log(16.0 / p.delta)) * p.tau / std::sqrt(p.n);
  double second = 58.0 *
                  std::sqrt(b_star * ell * std::log(16.0 * ell / p.delta) *
                            std::log(8.0 / p.delta)) *
                  p.tau / p.n;
  r.bound = first + second;
  double xi = ell * u_h * u_h / gamma2;
  r.n_required = 75.0 * xi * xi * std::log(20.0 * ell * p.m / p.delta);
  r.lambda_lo = 13.0 * u_h * std::sqrt(std::log(20.0 * p.m / p.delta)) * p.tau / std::sqrt(p.N);
  r.lambda_hi = gamma2 * beta_min / (3.0 * std::sqrt(ell));
  bool lambda_ok = p.lambda && *p.lambda >= r.lambda_lo * (1.0 - kRelSlack) &&
                   *p.lambda <= r.lambda_hi * (1.0 + kRelSlack);
  r.admissible = p.N >= r.n_required * (1.0 - kRelSlack) && lambda_ok;
  return r;
}

BCertificate exact_b(const BasisSpec& spec, int grid_points, std::uint64_t seed) {
  if (grid_points < 1) throw std::invalid_argument("exact_b: grid_points must be positive");
  BCertificate cert;
  cert.exact = closed_form_b(spec);

  Eigen::VectorXd weights(spec.m());
  for (Eigen::Index j = 0; j < spec.m(); ++j) {
    double w = 1.0;
    if (spec.family == BasisFamily::LegendreShifted)
      for (int degree : spec.indices[static_cast<std::size_t>(j)].degrees)
        if (degree > 0) w *= 2.0 * degree + 1.0;
    weights(j) = w;
  }

  const Eigen::Index block = 8192;
  Eigen::Index done = 0;
  double best = 0.0;
  while (done < grid_points) {
    Eigen::Index take = std::min(block, static_cast<Eigen::Index>(grid_points) - done);
    Eigen::MatrixXd x = sample_uniform_rows(spec.d, done, take, seed);
    Eigen::MatrixXd h = build_design(spec, x);
    Eigen::VectorXd vals = h.array().square().matrix() * weights;
    best = std::max(best, vals.maxCoeff());
    done += take;
  }
  cert.witness = best;
  return cert;
}

double wilson_half_width(double fraction, int trials) {
  if (trials < 1) throw std::invalid_argument("wilson_half_width: trials must be positive");
  const double z = 1.96;
  const double n = static_cast<double>(trials);
  const double z2 = z * z;
  return z * std::sqrt(fraction * (1.0 - fraction) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
}

Coverage empirical_coverage(const CoverageModel& model, BoundKind kind, int replicates,
                            std::uint64_t seed) {
  if (replicates < 1)
    throw std::invalid_argument("empirical_coverage: replicates must be positive");
  if (model.spec.d != 1)
    throw std::invalid_argument("empirical_coverage: one-dimensional families only");
  const Eigen::Index m = model.spec.m();
  if (model.beta_star.size() != m)
    throw std::invalid_argument("empirical_coverage: coefficient size mismatch");
  if (model.n < 2) throw std::invalid_argument("empirical_coverage: n too small");
  if (model.noise_amp < 0.0)
    throw std::invalid_argument("empirical_coverage: negative noise amplitude");

  BasisDiagnostics diag = diagnostics(model.spec);
  std::vector<Eigen::Index> support;
  double beta_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (model.beta_star(j) != 0.0) {
      support.push_back(j);
      beta_min = std::min(beta_min, std::abs(model.beta_star(j)));
    }
  }

  BoundParams p;
  p.tau = model.noise_amp;
  p.n = static_cast<double>(model.n);
  p.m = static_cast<double>(m);
  p.N = static_cast<double>(model.N);
  p.delta = model.delta;
  p.u_h = diag.u_h;

  double bound = 0.0;
  switch (kind) {
    case BoundKind::Ols: {
      p.b = closed_form_b(model.spec);
      OlsBound r = ols_bound(p);
      if (!r.n_admissible)
        throw std::invalid_argument("empirical_coverage: n below the admissible threshold");
      bound = r.bound;
      break;
    }
    case BoundKind::Lasso: {
      if (support.empty())
        throw std::invalid_argument("empirical_coverage: empty true support");
      p.gamma_star = diag.gamma;
      p.ell_star = static_cast<double>(support.size());
      p.lambda = model.lambda;
      LassoBound r = lasso_bound(p);
      if (!r.admissible)
        throw std::invalid_argument("empirical_coverage: inadmissible penalty configuration");
      bound = r.bound_general;
      break;
    }
    case BoundKind::Lslasso: {
      if (support.empty())
        throw std::invalid_argument("empirical_coverage: empty true support");
      if (model.N < 1 || model.N > model.n)
        throw std::invalid_argument("empirical_coverage: N out of range");
      p.gamma_2star = diag.gamma;
      p.ell_star = static_cast<double>(support.size());
      p.beta_min = beta_min;
      p.b_star = subset_b(model.spec, support);
      p.lambda = model.lambda;
      LslassoBound r = lslasso_bound(p);
      if (!r.admissible)
        throw std::invalid_argument("empirical_coverage: inadmissible two-stage configuration");
      bound = r.bound;
      break;
    }
  }

  int hits = 0;
  for (int rep = 0; rep < replicates; ++rep) {
    Eigen::MatrixXd x = sample_uniform(1, model.n, stream_seed(seed, static_cast<std::uint64_t>(rep)));
    Eigen::MatrixXd h = build_design(model.spec, x);
    Eigen::VectorXd f(model.n);
    for (Eigen::Index i = 0; i < model.n; ++i)
      f(i) = model.alpha + h.row(i) * model.beta_star +
             model.noise_amp * next_family_eval(model.spec, x(i, 0)) / diag.u_h;
    SampleBatch batch = SampleBatch::from_design(std::move(x), std::move(f), std::move(h));
    double est = 0.0;
    switch (kind) {
      case BoundKind::Ols: est = ols_estimate(batch).alpha; break;
      case BoundKind::Lasso: est = lasso_estimate(batch, model.lambda).alpha; break;
      case BoundKind::Lslasso:
        est = lslasso_at_lambda(batch, model.N, model.lambda).alpha;
        break;
    }
    if (std::abs(est - model.alpha) <= bound) ++hits;
  }

  Coverage cov;
  cov.replicates = replicates;
  cov.fraction = static_cast<double>(hits) / static_cast<double>(replicates);
  const double z = 1.96;
  const double nn = static_cast<double>(replicates);
  double center = (cov.fraction + z * z / (2.0 * nn)) / (1.0 + z * z / nn);
  double half = wilson_half_width(cov.fraction, replicates);
  cov.wilson_lo = std::min(center - half, cov.fraction);
  cov.wilson_hi = std::max(center + half, cov.fraction);
  cov.bound = bound;
  return cov;
}

std::string bounds_report_json(const BoundParams& p) {
  nlohmann::json j;
  j["oracle"] = oracle_bound(p);
  bool has_b = p.b || (p.m > 0.0 && p.u_h && p.gamma && *p.gamma > 0.0);
  if (p.m > 0.0 && has_b) {
    OlsBound r = ols_bound(p);
    auto res = resolve_b(p);
    j["ols"] = {{"bound", r.bound},
                {"n_required", r.n_required},
                {"n_admissible", r.n_admissible},
                {"b", res.value},
                {"b_source", res.source}};
  }
  if (p.m > 0.0 && p.u_h && p.gamma_star && p.ell_star) {
    LassoBound r = lasso_bound(p);
    j["lasso"] = {{"bound_general", r.bound_general},
                  {"bound_at_min_lambda", r.bound_at_min_lambda},
                  {"lambda_min", r.lambda_min},
                  {"n_required", r.n_required},
                  {"admissible", r.admissible}};
  }
  if (p.m > 0.0 && p.u_h && p.gamma_2star && p.ell_star && p.beta_min) {
    LambdaInterval w = lambda_interval(p);
    j["lambda_interval"] = {{"lo", w.lo}, {"hi", w.hi}, {"nonempty", w.nonempty}};
    if (p.b_star && p.N > 0.0) {
      LslassoBound r = lslasso_bound(p);
      j["lslasso"] = {{"bound", r.bound},
                      {"n_required", r.n_required},
                      {"lambda_lo", r.lambda_lo},
                      {"lambda_hi", r.lambda_hi},
                      {"admissible", r.admissible}};
    }
  }
  return j.dump();
}

BoundParams bound_params_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  BoundParams p;
  p.tau = j.value("tau", 0.0);
  p.n = j.value("n", 0.0);
  p.m = j.value("m", 0.0);
  p.N = j.value("N", 0.0);
  p.delta = j.value("delta", 0.0);
  auto opt = [&j](const char* key) -> std::optional<double> {
    if (j.contains(key) && !j[key].is_null()) return j[key].get<double>();
    return std::nullopt;
  };
  p.gamma = opt("gamma");
  p.gamma_star = opt("gamma_star");
  p.gamma_2star = opt("gamma_2star");
  p.u_h = opt("u_h");
  p.b = opt("b");
  p.b_star = opt("b_star");
  p.ell_star = opt("ell_star");
  p.lambda = opt("lambda");
  p.beta_min = opt("beta_min");
  return p;
}

}  // namespace cvmc
