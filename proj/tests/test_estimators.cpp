#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cvmc/basis.hpp"
#include "cvmc/bounds.hpp"
#include "cvmc/estimators.hpp"
#include "cvmc/rng.hpp"

using namespace cvmc;

namespace {

// f(x) = alpha0 + beta*.h(x) + amp * (first basis function outside the family),
// so the residual is bounded and exactly orthogonal to every control.
struct Synthetic {
  SampleBatch batch;
  Eigen::VectorXd beta_star;
  double alpha0;
};

Synthetic fourier_model(Eigen::Index n, int k, double alpha0, double amp, std::uint64_t seed) {
  auto spec = make_basis(BasisFamily::Fourier, 1, k, k);
  auto x = sample_uniform(1, n, seed);
  Eigen::MatrixXd h = build_design(spec, x);
  Eigen::VectorXd beta_star = Eigen::VectorXd::Zero(spec.m());
  beta_star(0) = 3.0;
  beta_star(1) = 1.0;
  Eigen::VectorXd f(n);
  for (Eigen::Index i = 0; i < n; ++i)
    f(i) = alpha0 + h.row(i) * beta_star + amp * fourier_eval(k + 1, x(i, 0));
  return {SampleBatch::from_design(x, f, h), beta_star, alpha0};
}

SampleBatch random_batch(Eigen::Index n, Eigen::Index m, std::uint64_t seed,
                         double noise = 0.1) {
  auto x = sample_uniform(static_cast<int>(m), n, seed);
  Eigen::MatrixXd h = x;  // iid uniform columns as a generic design
  Eigen::VectorXd w(m);
  for (Eigen::Index j = 0; j < m; ++j) w(j) = std::pow(-1.0, double(j)) / (1.0 + 0.3 * double(j));
  auto eps = sample_uniform(1, n, seed ^ 0xabcdef);
  Eigen::VectorXd f = h * w + noise * (eps.col(0).array() - 0.5).matrix();
  return SampleBatch::from_design(x, f, h);
}

double lasso_objective(const SampleBatch& b, const Eigen::VectorXd& beta_std, double lambda) {
  const double n = static_cast<double>(b.n());
  Eigen::MatrixXd u = b.H_c;
  for (Eigen::Index j = 0; j < b.m(); ++j)
    if (b.col_norms(j) > 0) u.col(j) /= b.col_norms(j) / std::sqrt(n);
  double quad = (b.f_c - u * beta_std).squaredNorm() / (2.0 * n);
  return quad + lambda * beta_std.lpNorm<1>();
}

Eigen::VectorXd fista(const SampleBatch& b, double lambda, int iters = 200000,
                      double tol = 1e-13) {
  const double n = static_cast<double>(b.n());
  Eigen::MatrixXd u = b.H_c;
  for (Eigen::Index j = 0; j < b.m(); ++j)
    if (b.col_norms(j) > 0) u.col(j) /= b.col_norms(j) / std::sqrt(n);
  Eigen::MatrixXd g = u.transpose() * u / n;
  double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().maxCoeff();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(b.m());
  Eigen::VectorXd y = beta;
  double t = 1.0;
  Eigen::VectorXd utf = u.transpose() * b.f_c / n;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd grad = g * y - utf;
    Eigen::VectorXd next = y - grad / L;
    for (Eigen::Index j = 0; j < next.size(); ++j) next(j) = soft_threshold(next(j), lambda / L);
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - beta);
    double step = (next - beta).lpNorm<Eigen::Infinity>();
    beta = next;
    t = t_next;
    if (step < tol) break;
  }
  return beta;
}

void check_kkt(const SampleBatch& b, const LassoFit& fit, double lambda, double tol) {
  const double n = static_cast<double>(b.n());
  Eigen::VectorXd r = b.f_c - b.H_c * fit.beta;
  for (Eigen::Index j = 0; j < b.m(); ++j) {
    if (b.col_norms(j) == 0.0) continue;
    double s = b.col_norms(j) / std::sqrt(n);
    double c = b.H_c.col(j).dot(r) / (s * n);
    if (fit.beta_std(j) == 0.0) {
      CHECK(std::abs(c) <= lambda * (1.0 + 10.0 * tol) + 10.0 * tol);
    } else {
      CHECK(std::abs(c - (fit.beta_std(j) > 0 ? lambda : -lambda)) <= 10.0 * tol);
    }
  }
}

}  // namespace

TEST_CASE("sample batch centering invariants") {
  auto b = random_batch(200, 5, 21);
  CHECK(b.n() == 200);
  CHECK(b.m() == 5);
  for (Eigen::Index j = 0; j < b.m(); ++j) {
    CHECK(std::abs(b.H_c.col(j).sum()) < 1e-10);
    CHECK(b.col_norms(j) == doctest::Approx(b.H_c.col(j).norm()).epsilon(1e-13));
    CHECK(b.col_means(j) == doctest::Approx(b.H.col(j).mean()).epsilon(1e-13));
  }
  CHECK(std::abs(b.f_c.sum()) < 1e-9);
  CHECK(b.f_mean == doctest::Approx(b.f_vals.mean()).epsilon(1e-14));
}

TEST_CASE("build from a basis spec matches from_design on the same design") {
  auto spec = make_basis(BasisFamily::LegendreShifted, 2, 3, 3);
  auto x = sample_uniform(2, 150, 33);
  Eigen::VectorXd f = x.col(0).array() * x.col(1).array();
  auto via_spec = SampleBatch::build(x, f, spec);
  auto via_design = SampleBatch::from_design(x, f, build_design(spec, x));
  CHECK((via_spec.H - via_design.H).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((via_spec.f_c - via_design.f_c).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("subbatch recenters the leading rows on themselves") {
  auto b = random_batch(100, 4, 8);
  auto s = subbatch(b, 40);
  CHECK(s.n() == 40);
  CHECK(s.m() == 4);
  CHECK(s.f_mean == doctest::Approx(b.f_vals.head(40).mean()).epsilon(1e-14));
  Eigen::VectorXd means = b.H.topRows(40).colwise().mean();
  CHECK((s.col_means - means).lpNorm<Eigen::Infinity>() < 1e-13);
  for (Eigen::Index j = 0; j < 4; ++j)
    CHECK(std::abs(s.H_c.col(j).sum()) < 1e-10);
  CHECK_THROWS_AS(subbatch(b, 0), std::invalid_argument);
  CHECK_THROWS_AS(subbatch(b, 101), std::invalid_argument);
}

TEST_CASE("vanilla estimate is the sample mean") {
  Eigen::VectorXd f(4);
  f << 1.0, 2.0, 3.0, 6.0;
  auto r = mc_estimate(f);
  CHECK(r.alpha == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(r.method == Method::MC);
  CHECK(r.beta.size() == 0);
  CHECK(r.active_set.empty());
}

TEST_CASE("oracle removes a known control combination exactly") {
  auto model = fourier_model(300, 6, 3.0, 0.0, 91);
  auto r = oracle_estimate(model.batch.f_vals, model.batch.H, model.beta_star);
  CHECK(r.alpha == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.method == Method::Oracle);

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.batch.m());
  auto as_mc = oracle_estimate(model.batch.f_vals, model.batch.H, zero);
  CHECK(as_mc.alpha == doctest::Approx(mc_estimate(model.batch.f_vals).alpha).epsilon(1e-15));

  Eigen::VectorXd short_beta = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(oracle_estimate(model.batch.f_vals, model.batch.H, short_beta),
                  std::invalid_argument);
}

TEST_CASE("oracle variance never exceeds vanilla variance on a noisy model") {
  const int reps = 200;
  double var_mc = 0, var_or = 0;
  for (int r = 0; r < reps; ++r) {
    auto model = fourier_model(250, 6, 1.0, 0.2, stream_seed(5000, r));
    double mc = mc_estimate(model.batch.f_vals).alpha;
    double oc = oracle_estimate(model.batch.f_vals, model.batch.H, model.beta_star).alpha;
    var_mc += (mc - 1.0) * (mc - 1.0);
    var_or += (oc - 1.0) * (oc - 1.0);
  }
  CHECK(var_or < var_mc);
}

TEST_CASE("least squares integrates controls and constants without error") {
  auto spec = make_basis(BasisFamily::LegendreShifted, 2, 4, 4);
  auto x = sample_uniform(2, 400, 57);
  Eigen::MatrixXd h = build_design(spec, x);

  auto exact = SampleBatch::from_design(x, h.col(0), h);
  auto r = ols_estimate(exact);
  CHECK(std::abs(r.alpha) <= 1e-9);
  CHECK(r.method == Method::OLS);

  Eigen::VectorXd c = Eigen::VectorXd::Constant(400, 3.7);
  auto constant = SampleBatch::from_design(x, c, h);
  auto rc = ols_estimate(constant);
  CHECK(rc.alpha == doctest::Approx(3.7).epsilon(1e-12));
  CHECK(rc.beta.lpNorm<Eigen::Infinity>() <= 1e-9);

  Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(h.cols(), -1.0, 2.0);
  Eigen::VectorXd f = 0.25 * Eigen::VectorXd::Ones(400) + h * w;
  auto combo = ols_estimate(SampleBatch::from_design(x, f, h));
  CHECK(std::abs(combo.alpha - 0.25) <= 1e-9);
}

TEST_CASE("estimate is invariant under well conditioned reparameterization") {
  auto b = random_batch(300, 6, 101);
  auto base = ols_estimate(b);

  auto raw = sample_uniform(6, 12, 7171);
  Eigen::MatrixXd g1 = raw.topRows(6), g2 = raw.bottomRows(6);
  Eigen::MatrixXd q1 = Eigen::HouseholderQR<Eigen::MatrixXd>(g1).householderQ();
  Eigen::MatrixXd q2 = Eigen::HouseholderQR<Eigen::MatrixXd>(g2).householderQ();
  Eigen::VectorXd sv = Eigen::VectorXd::LinSpaced(6, std::log(1.0), std::log(100.0));
  Eigen::MatrixXd a = q1 * sv.array().exp().matrix().asDiagonal() * q2;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  CHECK(svd.singularValues()(0) / svd.singularValues()(5) <= 1e3);

  auto rotated = SampleBatch::from_design(b.X, b.f_vals, b.H * a.transpose());
  auto r = ols_estimate(rotated);
  CHECK(std::abs(r.alpha - base.alpha) <= 1e-6);
}

TEST_CASE("duplicate columns take the minimal norm split") {
  auto x = sample_uniform(1, 120, 64);
  Eigen::MatrixXd h(120, 2);
  h.col(0) = x.col(0);
  h.col(1) = x.col(0);
  Eigen::VectorXd f = 2.0 * x.col(0);
  auto r = ols_estimate(SampleBatch::from_design(x, f, h));
  CHECK(r.rank_deficient);
  CHECK(r.beta(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.beta(1) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(r.alpha) <= 1e-9);
}

TEST_CASE("wide designs take the minimal norm fit with the intercept included") {
  auto b = random_batch(40, 100, 77, 0.05);
  auto r = ols_estimate(b);
  CHECK(r.rank_deficient);
  // Reference: pseudo-inverse of [1, H/s] on empirically standardized columns.
  Eigen::VectorXd inv_s = std::sqrt((double)b.n()) * b.col_norms.cwiseInverse();
  Eigen::MatrixXd w(b.n(), b.m() + 1);
  w.col(0).setOnes();
  w.rightCols(b.m()) = b.H * inv_s.asDiagonal();
  Eigen::VectorXd ref = w.completeOrthogonalDecomposition().solve(b.f_vals);
  CHECK(r.alpha == doctest::Approx(ref(0)).epsilon(1e-8));
  Eigen::VectorXd beta_ref = inv_s.cwiseProduct(ref.tail(b.m()));
  CHECK((r.beta - beta_ref).lpNorm<Eigen::Infinity>() <=
        1e-6 * (1.0 + beta_ref.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("soft threshold closed form") {
  CHECK(soft_threshold(2.0, 0.5) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(soft_threshold(0.3, 0.5) == 0.0);
  CHECK(soft_threshold(-2.0, 0.5) == doctest::Approx(-1.5).epsilon(1e-15));
  CHECK(soft_threshold(0.5, 0.5) == 0.0);
}

TEST_CASE("penalty at or above the critical value zeroes the fit") {
  auto b = random_batch(180, 8, 42);
  double lmax = lambda_max(b, b.n());
  auto hi = lasso_cd(b, lmax * 1.0001);
  CHECK(hi.beta.lpNorm<Eigen::Infinity>() == 0.0);
  auto lo = lasso_cd(b, lmax * 0.99);
  CHECK(lo.beta.lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("critical penalty basics") {
  auto x = sample_uniform(3, 90, 4);
  Eigen::MatrixXd h = x;
  Eigen::VectorXd c = Eigen::VectorXd::Constant(90, 2.5);
  auto flat = SampleBatch::from_design(x, c, h);
  CHECK(lambda_max(flat, 90) == 0.0);

  Eigen::VectorXd f = x.col(0) + 0.2 * x.col(1);
  auto b1 = SampleBatch::from_design(x, f, h);
  auto b2 = SampleBatch::from_design(x, Eigen::VectorXd(2.0 * f), h);
  CHECK(lambda_max(b2, 90) == doctest::Approx(2.0 * lambda_max(b1, 90)).epsilon(1e-12));

  CHECK(lambda_max(b1, 40) == doctest::Approx(lambda_max(subbatch(b1, 40), 40)).epsilon(1e-12));
  CHECK_THROWS_AS(lambda_max(b1, 0), std::invalid_argument);
  CHECK_THROWS_AS(lambda_max(b1, 91), std::invalid_argument);
}

TEST_CASE("single column fit has the thresholding closed form") {
  auto x = sample_uniform(1, 150, 11);
  Eigen::MatrixXd h = x;
  Eigen::VectorXd f = 1.4 * x.col(0) + 0.3 * Eigen::VectorXd::Ones(150);
  auto b = SampleBatch::from_design(x, f, h);
  double n = 150.0;
  double s = b.col_norms(0) / std::sqrt(n);
  Eigen::VectorXd u = b.H_c.col(0) / s;
  double z = u.dot(b.f_c) / n;
  double lambda = 0.4 * std::abs(z);
  auto fit = lasso_cd(b, lambda);
  CHECK(fit.beta_std(0) == doctest::Approx(soft_threshold(z, lambda)).epsilon(1e-10));
  CHECK(fit.beta(0) == doctest::Approx(soft_threshold(z, lambda) / s).epsilon(1e-10));
}

TEST_CASE("coordinate descent matches a proximal gradient reference") {
  for (int inst = 0; inst < 10; ++inst) {
    Eigen::Index n = 20 + 7 * inst;
    Eigen::Index m = 3 + inst;
    auto b = random_batch(n, m, stream_seed(321, inst), 0.3);
    double lambda = 0.25 * lambda_max(b, n);
    LassoOptions opts;
    auto fit = lasso_cd(b, lambda, opts);
    auto ref = fista(b, lambda);
    double obj_cd = lasso_objective(b, fit.beta_std, lambda);
    double obj_ref = lasso_objective(b, ref, lambda);
    CHECK(std::abs(obj_cd - obj_ref) <= 1e-8);
    check_kkt(b, fit, lambda, opts.tol);
  }
}

TEST_CASE("objective never increases across sweeps") {
  auto b = random_batch(120, 10, 909, 0.4);
  double lambda = 0.1 * lambda_max(b, b.n());
  double prev = lasso_objective(b, Eigen::VectorXd::Zero(10), lambda);
  for (int k = 1; k <= 12; ++k) {
    LassoOptions opts;
    opts.max_sweeps = k;
    auto fit = lasso_cd(b, lambda, opts);
    double obj = lasso_objective(b, fit.beta_std, lambda);
    CHECK(obj <= prev + 1e-12);
    prev = obj;
  }
}

TEST_CASE("support size grows monotonically along a warm started path") {
  auto b = random_batch(400, 30, 246, 0.2);
  double lmax = lambda_max(b, b.n());
  auto grid = default_lambda_grid(lmax, 24);
  Eigen::VectorXd warm = Eigen::VectorXd::Zero(30);
  Eigen::Index prev_support = 0;
  for (double lambda : grid) {
    auto fit = lasso_cd(b, lambda, {}, &warm);
    warm = fit.beta_std;
    Eigen::Index supp = (fit.beta_std.array() != 0.0).count();
    CHECK(supp >= prev_support);
    prev_support = supp;
  }
  CHECK(prev_support > 0);
}

TEST_CASE("zero variance columns are skipped, others unchanged") {
  auto b = random_batch(100, 4, 31);
  Eigen::MatrixXd h2(100, 5);
  h2.leftCols(4) = b.H;
  h2.col(4) = Eigen::VectorXd::Constant(100, 9.0);
  auto b2 = SampleBatch::from_design(b.X, b.f_vals, h2);
  CHECK(b2.col_norms(4) == doctest::Approx(0.0).epsilon(1e-12));
  double lambda = 0.2 * lambda_max(b, 100);
  auto base = lasso_cd(b, lambda);
  auto padded = lasso_cd(b2, lambda);
  CHECK(padded.beta(4) == 0.0);
  CHECK((padded.beta.head(4) - base.beta).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("non finite inputs are rejected") {
  auto b = random_batch(50, 3, 2);
  b.f_c(7) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lasso_cd(b, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(lasso_cd(random_batch(50, 3, 2), -0.5), std::invalid_argument);
}

TEST_CASE("lasso estimate wiring") {
  auto b = random_batch(250, 7, 404, 0.1);
  double lambda = 0.05 * lambda_max(b, 250);
  auto r = lasso_estimate(b, lambda);
  CHECK(r.method == Method::Lasso);
  REQUIRE(r.lambda_used.has_value());
  CHECK(*r.lambda_used == lambda);
  CHECK(r.alpha ==
        doctest::Approx(b.f_mean - r.beta.dot(b.col_means)).epsilon(1e-12));
  for (std::size_t i = 0; i + 1 < r.active_set.size(); ++i)
    CHECK(r.active_set[i] < r.active_set[i + 1]);
  for (auto j : r.active_set) CHECK(r.beta(j) != 0.0);
}

TEST_CASE("default grid is log spaced and spans four decades") {
  auto grid = default_lambda_grid(2.0);
  REQUIRE(grid.size() == 50);
  CHECK(grid.front() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(grid.back() == doctest::Approx(2e-4).epsilon(1e-12));
  double ratio = grid[1] / grid[0];
  for (std::size_t i = 1; i + 1 < grid.size(); ++i)
    CHECK(grid[i + 1] / grid[i] == doctest::Approx(ratio).epsilon(1e-10));
}

TEST_CASE("singleton grid cross validation reduces to a plain refit") {
  auto b = random_batch(90, 5, 5150, 0.2);
  double lambda = 0.3 * lambda_max(b, 60);
  auto sel = kfold_cv(b, 60, {lambda}, 5);
  CHECK(sel.lambda == lambda);
  auto direct = lasso_cd(subbatch(b, 60), lambda);
  CHECK((sel.beta_N - direct.beta).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("leave one out matches a hand rolled loop") {
  const Eigen::Index n = 30;
  auto b = random_batch(n, 3, 2718, 0.3);
  double lmax = lambda_max(b, n);
  std::vector<double> grid = {0.5 * lmax, 0.2 * lmax, 0.05 * lmax, 0.01 * lmax};

  std::vector<double> cv(grid.size(), 0.0);
  for (Eigen::Index hold = 0; hold < n; ++hold) {
    Eigen::MatrixXd xt(n - 1, b.X.cols());
    Eigen::MatrixXd ht(n - 1, 3);
    Eigen::VectorXd ft(n - 1);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == hold) continue;
      xt.row(at) = b.X.row(i);
      ht.row(at) = b.H.row(i);
      ft(at) = b.f_vals(i);
      ++at;
    }
    auto train = SampleBatch::from_design(xt, ft, ht);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(3);
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      auto fit = lasso_cd(train, grid[gi], {}, &warm);
      warm = fit.beta_std;
      double pred = train.f_mean + fit.beta.dot(b.H.row(hold).transpose() - train.col_means);
      double e = b.f_vals(hold) - pred;
      cv[gi] += e * e;
    }
  }
  std::size_t best = 0;
  for (std::size_t gi = 1; gi < grid.size(); ++gi)
    if (cv[gi] < cv[best]) best = gi;

  auto sel = kfold_cv(b, n, grid, static_cast<int>(n));
  CHECK(sel.lambda == doctest::Approx(grid[best]).epsilon(1e-14));
}

TEST_CASE("strong signal drives cross validation into the lowest decade") {
  auto spec = make_basis(BasisFamily::Fourier, 1, 10, 10);
  auto x = sample_uniform(1, 800, 1234);
  Eigen::MatrixXd h = build_design(spec, x);
  auto eps = sample_uniform(1, 800, 4321);
  Eigen::VectorXd f = 2.0 * h.col(0) + 1.0 * h.col(3) +
                      0.01 * (eps.col(0).array() - 0.5).matrix();
  auto b = SampleBatch::from_design(x, f, h);
  double lmax = lambda_max(b, 400);
  auto grid = default_lambda_grid(lmax);
  auto sel = kfold_cv(b, 400, grid, 5);
  CHECK(sel.lambda <= 1e-2 * lmax);
}

TEST_CASE("cross validation input checks") {
  auto b = random_batch(40, 3, 6);
  CHECK_THROWS_AS(kfold_cv(b, 4, {0.1}, 5), std::invalid_argument);
  CHECK_THROWS_AS(kfold_cv(b, 20, {}, 5), std::invalid_argument);
  CHECK_THROWS_AS(kfold_cv(b, 20, {0.1}, 1), std::invalid_argument);
}

TEST_CASE("support targets use the full sample size") {
  auto r1 = dichotomic_range(2000);
  CHECK(r1.first == 134);
  CHECK(r1.second == 536);
  auto r2 = dichotomic_range(5000);
  CHECK(r2.first == 212);
  CHECK(r2.second == 848);
  auto r3 = dichotomic_range(10000);
  CHECK(r3.first == 300);
  CHECK(r3.second == 1200);
}

TEST_CASE("dichotomic search lands the support size inside the target window") {
  const Eigen::Index n = 900;
  auto b = random_batch(n, 140, 515, 0.6);
  auto [lo, hi] = dichotomic_range(n);
  REQUIRE(lo == 90);
  REQUIRE(hi == 360);
  auto sel = dichotomic_search(b, 450);
  CHECK_FALSE(sel.range_unreachable);
  Eigen::Index supp = (sel.beta_N.array() != 0.0).count();
  CHECK(supp >= lo);
  CHECK(supp <= hi);
  CHECK(sel.steps <= 60);
}

TEST_CASE("unreachable support window takes the warning path") {
  const Eigen::Index n = 10000;
  auto b = random_batch(n, 50, 626, 0.3);
  auto sel = dichotomic_search(b, 1000);
  CHECK(sel.range_unreachable);
  Eigen::Index supp = (sel.beta_N.array() != 0.0).count();
  CHECK(supp <= 50);
  double floor_lambda = 1e-4 * lambda_max(b, 1000);
  CHECK(sel.lambda == doctest::Approx(floor_lambda).epsilon(1e-12));
}

TEST_CASE("two stage fit recovers a planted support and matches restricted least squares") {
  auto spec = make_basis(BasisFamily::Fourier, 1, 20, 20);
  auto x = sample_uniform(1, 600, 888);
  Eigen::MatrixXd h = build_design(spec, x);
  auto eps = sample_uniform(1, 600, 889);
  Eigen::VectorXd f = 2.0 * Eigen::VectorXd::Ones(600) + 3.0 * h.col(0) + h.col(1) +
                      0.05 * (eps.col(0).array() - 0.5).matrix();
  auto b = SampleBatch::from_design(x, f, h);
  auto r = lslasso_estimate(b, 300, Selector::KFold);
  CHECK(r.method == Method::LSLasso);
  REQUIRE(r.subsample_N.has_value());
  CHECK(*r.subsample_N == 300);
  std::vector<Eigen::Index> s = r.active_set;
  CHECK(std::find(s.begin(), s.end(), 0) != s.end());
  CHECK(std::find(s.begin(), s.end(), 1) != s.end());

  Eigen::MatrixXd h_sub(600, static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) h_sub.col(static_cast<Eigen::Index>(i)) = h.col(s[i]);
  auto restricted = ols_estimate(SampleBatch::from_design(x, f, h_sub));
  CHECK(r.alpha == doctest::Approx(restricted.alpha).epsilon(1e-12));
}

TEST_CASE("vacuous selection reduces to full least squares") {
  auto b = random_batch(200, 5, 117, 0.2);
  double tiny = 1e-9 * lambda_max(b, 200);
  auto two_stage = lslasso_at_lambda(b, 200, tiny);
  auto full = ols_estimate(b);
  CHECK(two_stage.active_set.size() == 5);
  CHECK(two_stage.alpha == doctest::Approx(full.alpha).epsilon(1e-10));
}

TEST_CASE("empty selection degrades to the plain mean") {
  auto b = random_batch(150, 6, 272, 0.2);
  double lambda = 2.0 * lambda_max(b, 150);
  auto r = lslasso_at_lambda(b, 150, lambda);
  CHECK(r.mc_fallback);
  CHECK(r.active_set.empty());
  CHECK(r.alpha == doctest::Approx(b.f_mean).epsilon(1e-15));
}

TEST_CASE("variance ordering holds in the sparse orthogonal regime") {
  const Eigen::Index n = 1500;
  const int k = 10;
  const double a = 0.05;
  auto spec = make_basis(BasisFamily::Fourier, 1, k, k);
  auto diag = diagnostics(spec);

  BoundParams p;
  p.tau = a;
  p.n = n;
  p.m = k;
  p.delta = 0.1;
  p.u_h = diag.u_h;
  p.gamma_2star = 1.0;
  p.ell_star = 2;
  p.beta_min = 1.0;
  auto window = lambda_interval(p);
  REQUIRE(window.nonempty);
  double lambda = std::sqrt(window.lo * window.hi);

  const int reps = 200;
  const Eigen::Index sub = static_cast<Eigen::Index>(15.0 * std::sqrt(double(n)));
  double mse_mc = 0, mse_ols = 0, mse_or = 0, mse_ls = 0;
  for (int r = 0; r < reps; ++r) {
    auto model = fourier_model(n, k, 1.0, a, stream_seed(31337, r));
    double mc = mc_estimate(model.batch.f_vals).alpha;
    double ols = ols_estimate(model.batch).alpha;
    double orc = oracle_estimate(model.batch.f_vals, model.batch.H, model.beta_star).alpha;
    double ls = lslasso_at_lambda(model.batch, sub, lambda).alpha;
    mse_mc += (mc - 1.0) * (mc - 1.0);
    mse_ols += (ols - 1.0) * (ols - 1.0);
    mse_or += (orc - 1.0) * (orc - 1.0);
    mse_ls += (ls - 1.0) * (ls - 1.0);
  }
  CHECK(mse_ols <= mse_mc);
  CHECK(mse_ls <= 1.5 * mse_or);
}

TEST_CASE("estimate serializes to json") {
  auto b = random_batch(100, 4, 77, 0.2);
  auto r = lasso_estimate(b, 0.3 * lambda_max(b, 100));
  auto j = r.to_json();
  CHECK(j.find("\"alpha\"") != std::string::npos);
  CHECK(j.find("\"method\"") != std::string::npos);
  CHECK(j.find("\"lambda\"") != std::string::npos);
  CHECK(j.find("\"active_set\"") != std::string::npos);
}
