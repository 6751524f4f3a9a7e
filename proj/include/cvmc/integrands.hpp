#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <optional>
#include <string>

namespace cvmc {

struct Integrand {
  std::string name;
  int dim = 1;
  std::optional<double> true_value;
  std::function<double(const double*)> eval;

  // Row-wise evaluation; overridable with a vectorized form.
  Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::MatrixXd>& points) const;
};

// 1 + sin(pi(2/d sum x_i - 1)); integrates to 1 on [0,1]^d.
Integrand make_phi(int d);

// prod_{i<=j} sqrt(2/pi) x_i^{-1} exp(-log(x_i)^2/2); integrates to 1.
// Evaluation at x_i = 0 for i <= j is a domain error (throws).
Integrand make_f(int d, int j);

// log(2)^j 2^{sum_{i<=j}(1-x_i)}; integrates to 1.
Integrand make_g(int d, int j);

// European dipper capture-recapture study: release counts R_i and recapture
// counts x_{i,j} (bird released year i, first recaptured year j), years
// i = 1..6, j = 2..7.
struct CaptureData {
  std::array<double, 6> R;
  double x[7][8];  // x[i][j], valid for 1<=i<=6, i<j<=7; zero elsewhere

  std::array<double, 6> never_recaptured() const;  // r_i = R_i - sum_j x_{i,j}
  std::string to_json() const;
};

CaptureData dipper_data();

// nu_{i,j}: probability that a bird released year i is next recaptured year j,
// phi_i p_j prod_{k=i+1}^{j-1} phi_k (1-p_k). 1 <= i < j <= 7.
double capture_nu(const double* theta, int i, int j);

// Cormack-Jolly-Seber log likelihood; theta = (phi_1..phi_6, p_2..p_7) in
// [0,1]^12. Returns -inf when a positive count sits on a zero-probability cell.
double capture_loglik(const CaptureData& data, const double* theta);

// exp(capture_loglik); underflows to 0 far from the mode, use the log form
// for evidence work.
double capture_likelihood(const CaptureData& data, const double* theta);

// Sonar returns: 208 observations, 60 features plus leading intercept column,
// labels M -> +1, R -> -1.
struct SonarData {
  Eigen::MatrixXd X;  // 208 x 61
  Eigen::VectorXd y;  // +-1
};

// expect_rows lets tests load truncated fixtures; the shipped dataset has 208.
SonarData load_sonar(const std::string& path, int expect_rows = 208);

// Logistic log likelihood -sum_i log(1 + exp(-y_i <X_i, theta>)), stable form.
double sonar_loglik(const SonarData& data, const double* theta);

// Batch form: one log likelihood per row of thetas (rows are points).
Eigen::VectorXd sonar_loglik_batch(const SonarData& data,
                                   const Eigen::Ref<const Eigen::MatrixXd>& thetas);

}  // namespace cvmc
