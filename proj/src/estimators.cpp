#include "cvmc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace cvmc {

namespace {

const char* method_name(Method m) {
  switch (m) {
    case Method::MC: return "mc";
    case Method::Oracle: return "oracle";
    case Method::OLS: return "ols";
    case Method::Lasso: return "lasso";
    case Method::LSLasso: return "lslasso";
  }
  return "unknown";
}

std::vector<Eigen::Index> nonzero_indices(const Eigen::VectorXd& v) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (v(j) != 0.0) idx.push_back(j);
  return idx;
}

// Min-norm solve of a PSD system, dropping the spectrum below n_scale * eps * lambda_max.
Eigen::VectorXd psd_pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs,
                               double n_scale) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd& vals = es.eigenvalues();
  double vmax = vals.cwiseAbs().maxCoeff();
  double cutoff = n_scale * std::numeric_limits<double>::epsilon() * vmax;
  Eigen::VectorXd proj = es.eigenvectors().transpose() * rhs;
  Eigen::VectorXd scaled = Eigen::VectorXd::Zero(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i)
    if (vals(i) > cutoff) scaled(i) = proj(i) / vals(i);
  return es.eigenvectors() * scaled;
}

// sqrt(n)/||H_c col|| per column, the empirical standardization scale;
// unit scale for zero-norm columns.
Eigen::VectorXd standard_inverse_scale(const SampleBatch& batch) {
  const double root_n = std::sqrt(static_cast<double>(batch.n()));
  Eigen::VectorXd inv_s(batch.m());
  for (Eigen::Index j = 0; j < batch.m(); ++j)
    inv_s(j) = batch.col_norms(j) > 0.0 ? root_n / batch.col_norms(j) : 1.0;
  return inv_s;
}

}  // namespace

SampleBatch SampleBatch::from_design(Eigen::MatrixXd X, Eigen::VectorXd f_vals,
                                     Eigen::MatrixXd H) {
  if (f_vals.size() < 1) throw std::invalid_argument("sample batch: empty batch");
  if (X.rows() != f_vals.size() || H.rows() != f_vals.size())
    throw std::invalid_argument("sample batch: row count mismatch");
  SampleBatch b;
  b.X = std::move(X);
  b.f_vals = std::move(f_vals);
  b.H = std::move(H);
  b.f_mean = b.f_vals.mean();
  b.f_c = b.f_vals.array() - b.f_mean;
  b.col_means = b.H.colwise().mean().transpose();
  b.H_c = b.H.rowwise() - b.col_means.transpose();
  b.col_norms = b.H_c.colwise().norm().transpose();
  return b;
}

SampleBatch SampleBatch::build(Eigen::MatrixXd X, Eigen::VectorXd f_vals, const BasisSpec& spec) {
  Eigen::MatrixXd H = build_design(spec, X);
  return from_design(std::move(X), std::move(f_vals), std::move(H));
}

SampleBatch subbatch(const SampleBatch& batch, Eigen::Index N) {
  if (N < 1 || N > batch.n()) throw std::invalid_argument("subbatch: N out of range");
  return SampleBatch::from_design(batch.X.topRows(N), batch.f_vals.head(N), batch.H.topRows(N));
}

std::string EstimateResult::to_json() const {
  nlohmann::json j;
  j["alpha"] = alpha;
  j["method"] = method_name(method);
  j["iterations"] = iterations;
  j["lambda"] = lambda_used ? nlohmann::json(*lambda_used) : nlohmann::json(nullptr);
  j["subsample_N"] = subsample_N ? nlohmann::json(*subsample_N) : nlohmann::json(nullptr);
  j["active_set"] = active_set;
  std::vector<double> coef;
  coef.reserve(active_set.size());
  for (auto k : active_set) coef.push_back(beta(k));
  j["beta_active"] = coef;
  j["rank_deficient"] = rank_deficient;
  j["mc_fallback"] = mc_fallback;
  j["range_unreachable"] = range_unreachable;
  return j.dump();
}

EstimateResult mc_estimate(const Eigen::Ref<const Eigen::VectorXd>& f_vals) {
  if (f_vals.size() < 1) throw std::invalid_argument("mc_estimate: empty sample");
  EstimateResult r;
  r.method = Method::MC;
  r.alpha = f_vals.mean();
  r.beta.resize(0);
  return r;
}

EstimateResult oracle_estimate(const Eigen::Ref<const Eigen::VectorXd>& f_vals,
                               const Eigen::Ref<const Eigen::MatrixXd>& H,
                               const Eigen::Ref<const Eigen::VectorXd>& beta_star) {
  if (H.rows() != f_vals.size()) throw std::invalid_argument("oracle_estimate: row mismatch");
  if (beta_star.size() != H.cols())
    throw std::invalid_argument("oracle_estimate: coefficient size mismatch");
  EstimateResult r;
  r.method = Method::Oracle;
  r.alpha = (f_vals - H * beta_star).mean();
  r.beta = beta_star;
  r.active_set = nonzero_indices(r.beta);
  return r;
}

EstimateResult ols_estimate(const SampleBatch& batch) {
  const Eigen::Index n = batch.n();
  const Eigen::Index m = batch.m();
  EstimateResult r;
  r.method = Method::OLS;
  if (m == 0) {
    r.alpha = batch.f_mean;
    r.beta.resize(0);
    return r;
  }

  const double eps = std::numeric_limits<double>::epsilon();

  if (m <= n) {
    Eigen::MatrixXd g = batch.H_c.transpose() * batch.H_c;
    Eigen::VectorXd rhs = batch.H_c.transpose() * batch.f_c;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    bool solved = false;
    Eigen::VectorXd beta;
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd d = ldlt.vectorD();
      double dmax = d.cwiseAbs().maxCoeff();
      if (d.minCoeff() > 0.0 && d.cwiseAbs().minCoeff() > dmax * double(n) * eps) {
        beta = ldlt.solve(rhs);
        double resid = (g * beta - rhs).norm();
        if (resid <= 1e-8 * (dmax * beta.norm() + rhs.norm() + 1e-300)) solved = true;
      }
    }
    if (solved) {
      r.beta = beta;
      r.alpha = batch.f_mean - beta.dot(batch.col_means);
      r.active_set = nonzero_indices(r.beta);
      return r;
    }
    // Non-unique fit: standardize the columns to the empirical scale used by
    // the penalized solvers, put the intercept on the same footing, and take
    // the minimal-norm coefficients of the augmented regression [1, H/s].
    // Once the data no longer identify the intercept it is shrunk with
    // everything else, which is what makes the overparameterized regime
    // degrade instead of interpolating benignly.
    Eigen::VectorXd inv_s = standard_inverse_scale(batch);
    Eigen::MatrixXd g2(m + 1, m + 1);
    g2(0, 0) = double(n);
    g2.block(0, 1, 1, m) =
        double(n) * batch.col_means.cwiseProduct(inv_s).transpose();
    g2.block(1, 0, m, 1) = g2.block(0, 1, 1, m).transpose();
    g2.block(1, 1, m, m) =
        inv_s.asDiagonal() * (batch.H.transpose() * batch.H) * inv_s.asDiagonal();
    Eigen::VectorXd rhs2(m + 1);
    rhs2(0) = double(n) * batch.f_mean;
    rhs2.tail(m) = inv_s.cwiseProduct(batch.H.transpose() * batch.f_vals);
    Eigen::VectorXd theta = psd_pinv_solve(g2, rhs2, double(n));
    r.rank_deficient = true;
    r.alpha = theta(0);
    r.beta = inv_s.cwiseProduct(theta.tail(m));
    r.active_set = nonzero_indices(r.beta);
    return r;
  }

  // Wide design (m > n): the fit is never unique. Standardize as above and
  // take the minimal-norm coefficients through the dual n x n system
  // W W^T u = f with W = [1, H/s]; alpha = sum(u), and the 11^T term is the
  // intercept column's contribution to W W^T.
  Eigen::VectorXd inv_s = standard_inverse_scale(batch);
  Eigen::MatrixXd wmat = batch.H * inv_s.asDiagonal();
  Eigen::MatrixXd kmat = wmat * wmat.transpose();
  kmat.array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(kmat);
  Eigen::VectorXd u;
  bool solved = false;
  if (llt.info() == Eigen::Success) {
    u = llt.solve(batch.f_vals);
    double resid = (kmat * u - batch.f_vals).norm();
    if (resid <= 1e-6 * (batch.f_vals.norm() + 1e-300)) solved = true;
  }
  if (!solved) u = psd_pinv_solve(kmat, batch.f_vals, double(n));
  r.rank_deficient = true;
  r.alpha = u.sum();
  r.beta = inv_s.cwiseProduct(wmat.transpose() * u);
  r.active_set = nonzero_indices(r.beta);
  return r;
}

LassoFit lasso_cd(const SampleBatch& batch, double lambda, const LassoOptions& opts,
                  const Eigen::VectorXd* warm_std) {
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw std::invalid_argument("lasso_cd: lambda must be finite and nonnegative");
  if (!batch.f_c.allFinite() || !batch.H_c.allFinite())
    throw std::invalid_argument("lasso_cd: non-finite values in batch");
  if (warm_std != nullptr && warm_std->size() != batch.m())
    throw std::invalid_argument("lasso_cd: warm start size mismatch");

  const Eigen::Index n = batch.n();
  const Eigen::Index m = batch.m();
  const double dn = static_cast<double>(n);
  const double root_n = std::sqrt(dn);

  Eigen::VectorXd s = batch.col_norms / root_n;
  Eigen::VectorXd b = warm_std != nullptr ? *warm_std : Eigen::VectorXd::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j)
    if (s(j) == 0.0) b(j) = 0.0;

  // Residual kept in original column units: r = f_c - sum_j H_c_j b_j / s_j.
  Eigen::VectorXd resid = batch.f_c;
  for (Eigen::Index j = 0; j < m; ++j)
    if (b(j) != 0.0) resid -= batch.H_c.col(j) * (b(j) / s(j));

  int sweeps = 0;
  auto sweep = [&](bool active_only) {
    double max_step = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (s(j) == 0.0) continue;
      if (active_only && b(j) == 0.0) continue;
      double grad = batch.H_c.col(j).dot(resid) / (s(j) * dn);
      double next = soft_threshold(b(j) + grad, lambda);
      double step = next - b(j);
      if (step != 0.0) {
        resid -= batch.H_c.col(j) * (step / s(j));
        b(j) = next;
        max_step = std::max(max_step, std::abs(step));
      }
    }
    ++sweeps;
    return max_step;
  };

  while (sweeps < opts.max_sweeps) {
    double full_step = sweep(false);
    if (full_step < opts.tol) break;
    while (sweeps < opts.max_sweeps) {
      if (sweep(true) < opts.tol) break;
    }
  }

  LassoFit fit;
  fit.beta_std = b;
  fit.beta = Eigen::VectorXd::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j)
    if (b(j) != 0.0) fit.beta(j) = b(j) / s(j);
  fit.sweeps = sweeps;
  return fit;
}

EstimateResult lasso_estimate(const SampleBatch& batch, double lambda, const LassoOptions& opts) {
  LassoFit fit = lasso_cd(batch, lambda, opts);
  EstimateResult r;
  r.method = Method::Lasso;
  r.beta = fit.beta;
  r.alpha = batch.f_mean - fit.beta.dot(batch.col_means);
  r.iterations = fit.sweeps;
  r.lambda_used = lambda;
  r.active_set = nonzero_indices(fit.beta);
  r.mc_fallback = r.active_set.empty();
  return r;
}

double lambda_max(const SampleBatch& batch, Eigen::Index N) {
  if (N < 1 || N > batch.n()) throw std::invalid_argument("lambda_max: N out of range");
  SampleBatch sub_store;
  const SampleBatch* sub = &batch;
  if (N < batch.n()) {
    sub_store = subbatch(batch, N);
    sub = &sub_store;
  }
  const double root_n = std::sqrt(static_cast<double>(N));
  double best = 0.0;
  for (Eigen::Index j = 0; j < sub->m(); ++j) {
    if (sub->col_norms(j) == 0.0) continue;
    double v = std::abs(sub->H_c.col(j).dot(sub->f_c)) / (sub->col_norms(j) * root_n);
    best = std::max(best, v);
  }
  return best;
}

std::vector<double> default_lambda_grid(double lmax, int points) {
  if (points < 1) throw std::invalid_argument("default_lambda_grid: need at least one point");
  if (points == 1) return {lmax};
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] =
        lmax * std::pow(1e-4, static_cast<double>(i) / static_cast<double>(points - 1));
  return grid;
}

std::pair<Eigen::Index, Eigen::Index> dichotomic_range(Eigen::Index n, double c1, double c2) {
  if (n < 1) throw std::invalid_argument("dichotomic_range: n must be positive");
  double root = std::sqrt(static_cast<double>(n));
  return {static_cast<Eigen::Index>(std::floor(c1 * root)),
          static_cast<Eigen::Index>(std::floor(c2 * root))};
}

SelectionResult dichotomic_search(const SampleBatch& batch, Eigen::Index N, double c1, double c2,
                                  int max_steps, const LassoOptions& opts) {
  auto [lo, hi] = dichotomic_range(batch.n(), c1, c2);
  SampleBatch sub = subbatch(batch, N);
  double lmax = lambda_max(batch, N);

  SelectionResult sel;
  if (batch.m() < lo || lmax == 0.0) {
    // Window not reachable at any penalty; report the densest solution we are
    // willing to take (the bottom of the default grid) and flag it.
    double lam = 1e-4 * lmax;
    LassoFit fit = lasso_cd(sub, lam, opts);
    sel.beta_N = fit.beta;
    sel.lambda = lam;
    sel.steps = 1;
    sel.range_unreachable = true;
    return sel;
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  double lam = lmax;
  double lam_sparse = nan;  // smallest lambda seen with support below the window
  double lam_dense = nan;   // largest lambda seen with support above the window
  Eigen::VectorXd warm = Eigen::VectorXd::Zero(batch.m());
  Eigen::Index best_dist = std::numeric_limits<Eigen::Index>::max();
  int steps = 0;

  while (steps < max_steps) {
    LassoFit fit = lasso_cd(sub, lam, opts, &warm);
    warm = fit.beta_std;
    ++steps;
    Eigen::Index supp = (fit.beta.array() != 0.0).count();
    Eigen::Index dist = supp < lo ? lo - supp : (supp > hi ? supp - hi : 0);
    if (dist < best_dist) {
      best_dist = dist;
      sel.beta_N = fit.beta;
      sel.lambda = lam;
    }
    if (dist == 0) break;
    if (supp < lo) lam_sparse = lam;
    else lam_dense = lam;
    if (std::isnan(lam_dense)) {
      lam *= 0.5;
    } else if (std::isnan(lam_sparse)) {
      lam *= 2.0;
    } else {
      if (!(lam_sparse > lam_dense * (1.0 + 1e-12))) break;
      lam = std::sqrt(lam_sparse * lam_dense);
    }
  }

  sel.steps = steps;
  sel.range_unreachable = best_dist != 0;
  return sel;
}

SelectionResult kfold_cv(const SampleBatch& batch, Eigen::Index N,
                         const std::vector<double>& grid, int K, const LassoOptions& opts) {
  if (grid.empty()) throw std::invalid_argument("kfold_cv: empty lambda grid");
  if (K < 2) throw std::invalid_argument("kfold_cv: need at least two folds");
  if (N < K) throw std::invalid_argument("kfold_cv: fewer rows than folds");
  SampleBatch sub = subbatch(batch, N);
  const Eigen::Index m = sub.m();

  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return grid[a] > grid[b]; });

  std::vector<double> cv(grid.size(), 0.0);
  for (int k = 0; k < K; ++k) {
    Eigen::Index fold_lo = static_cast<Eigen::Index>(k) * N / K;
    Eigen::Index fold_hi = static_cast<Eigen::Index>(k + 1) * N / K;
    Eigen::Index tail = N - fold_hi;
    Eigen::Index nt = N - (fold_hi - fold_lo);
    Eigen::MatrixXd xt(nt, sub.X.cols());
    Eigen::MatrixXd ht(nt, m);
    Eigen::VectorXd ft(nt);
    xt.topRows(fold_lo) = sub.X.topRows(fold_lo);
    ht.topRows(fold_lo) = sub.H.topRows(fold_lo);
    ft.head(fold_lo) = sub.f_vals.head(fold_lo);
    xt.bottomRows(tail) = sub.X.bottomRows(tail);
    ht.bottomRows(tail) = sub.H.bottomRows(tail);
    ft.tail(tail) = sub.f_vals.tail(tail);
    SampleBatch train = SampleBatch::from_design(std::move(xt), std::move(ft), std::move(ht));

    Eigen::VectorXd warm = Eigen::VectorXd::Zero(m);
    for (std::size_t gi : order) {
      LassoFit fit = lasso_cd(train, grid[gi], opts, &warm);
      warm = fit.beta_std;
      for (Eigen::Index i = fold_lo; i < fold_hi; ++i) {
        double pred = train.f_mean + fit.beta.dot(sub.H.row(i).transpose() - train.col_means);
        double err = sub.f_vals(i) - pred;
        cv[gi] += err * err;
      }
    }
  }

  // Descending scan with a strict comparison: ties go to the larger penalty.
  std::size_t best = order.front();
  for (std::size_t gi : order)
    if (cv[gi] < cv[best]) best = gi;

  LassoFit refit = lasso_cd(sub, grid[best], opts);
  SelectionResult sel;
  sel.beta_N = refit.beta;
  sel.lambda = grid[best];
  sel.steps = static_cast<int>(grid.size()) * K + 1;
  return sel;
}

namespace {

EstimateResult restricted_refit(const SampleBatch& batch, const Eigen::VectorXd& beta_N) {
  EstimateResult r;
  r.method = Method::LSLasso;
  std::vector<Eigen::Index> support = nonzero_indices(beta_N);
  if (support.empty()) {
    r.alpha = batch.f_mean;
    r.beta = Eigen::VectorXd::Zero(batch.m());
    r.mc_fallback = true;
    return r;
  }
  Eigen::MatrixXd hs(batch.n(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i)
    hs.col(static_cast<Eigen::Index>(i)) = batch.H.col(support[i]);
  SampleBatch restricted = SampleBatch::from_design(batch.X, batch.f_vals, std::move(hs));
  EstimateResult ols = ols_estimate(restricted);
  r.alpha = ols.alpha;
  r.rank_deficient = ols.rank_deficient;
  r.beta = Eigen::VectorXd::Zero(batch.m());
  for (std::size_t i = 0; i < support.size(); ++i)
    r.beta(support[i]) = ols.beta(static_cast<Eigen::Index>(i));
  r.active_set = std::move(support);
  return r;
}

}  // namespace

EstimateResult lslasso_estimate(const SampleBatch& batch, Eigen::Index N, Selector selector,
                                const LassoOptions& opts) {
  SelectionResult sel;
  if (selector == Selector::Dichotomic) {
    sel = dichotomic_search(batch, N, 3, 12, 60, opts);
  } else {
    sel = kfold_cv(batch, N, default_lambda_grid(lambda_max(batch, N)), 5, opts);
  }
  EstimateResult r = restricted_refit(batch, sel.beta_N);
  r.lambda_used = sel.lambda;
  r.subsample_N = N;
  r.iterations = sel.steps;
  r.range_unreachable = sel.range_unreachable;
  return r;
}

EstimateResult lslasso_at_lambda(const SampleBatch& batch, Eigen::Index N, double lambda,
                                 const LassoOptions& opts) {
  SampleBatch sub = subbatch(batch, N);
  LassoFit fit = lasso_cd(sub, lambda, opts);
  EstimateResult r = restricted_refit(batch, fit.beta);
  r.lambda_used = lambda;
  r.subsample_N = N;
  r.iterations = fit.sweeps;
  return r;
}

}  // namespace cvmc
