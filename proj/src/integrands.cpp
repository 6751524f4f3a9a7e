#include "cvmc/integrands.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cvmc {

Eigen::VectorXd Integrand::operator()(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  if (points.cols() != dim) throw std::invalid_argument("integrand: dimension mismatch");
  Eigen::VectorXd out(points.rows());
  Eigen::RowVectorXd buf(dim);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    buf = points.row(i);
    out(i) = eval(buf.data());
  }
  return out;
}

Integrand make_phi(int d) {
  if (d < 1) throw std::invalid_argument("make_phi: d >= 1");
  Integrand f;
  f.name = "phi";
  f.dim = d;
  f.true_value = 1.0;
  f.eval = [d](const double* x) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += x[i];
    return 1.0 + std::sin(M_PI * (2.0 * s / d - 1.0));
  };
  return f;
}

Integrand make_f(int d, int j) {
  if (d < 1 || j < 1 || j > d) throw std::invalid_argument("make_f: 1 <= j <= d");
  Integrand f;
  f.name = "f" + std::to_string(j);
  f.dim = d;
  f.true_value = 1.0;
  const double c = std::sqrt(2.0 / M_PI);
  f.eval = [j, c](const double* x) {
    double prod = 1.0;
    for (int i = 0; i < j; ++i) {
      if (x[i] <= 0.0) throw std::domain_error("f_j: log-normal factor needs x > 0");
      double lg = std::log(x[i]);
      prod *= c / x[i] * std::exp(-0.5 * lg * lg);
    }
    return prod;
  };
  return f;
}

Integrand make_g(int d, int j) {
  if (d < 1 || j < 1 || j > d) throw std::invalid_argument("make_g: 1 <= j <= d");
  Integrand f;
  f.name = "g" + std::to_string(j);
  f.dim = d;
  f.true_value = 1.0;
  const double log2 = std::log(2.0);
  f.eval = [j, log2](const double* x) {
    double s = 0.0;
    for (int i = 0; i < j; ++i) s += 1.0 - x[i];
    return std::pow(log2, j) * std::exp2(s);
  };
  return f;
}

std::array<double, 6> CaptureData::never_recaptured() const {
  std::array<double, 6> r{};
  for (int i = 1; i <= 6; ++i) {
    double caught = 0.0;
    for (int j = i + 1; j <= 7; ++j) caught += x[i][j];
    r[static_cast<std::size_t>(i - 1)] = R[static_cast<std::size_t>(i - 1)] - caught;
  }
  return r;
}

std::string CaptureData::to_json() const {
  nlohmann::json j;
  j["R"] = R;
  auto rows = nlohmann::json::array();
  for (int i = 1; i <= 6; ++i) {
    auto row = nlohmann::json::array();
    for (int jj = i + 1; jj <= 7; ++jj) row.push_back(x[i][jj]);
    rows.push_back(row);
  }
  j["x"] = rows;
  return j.dump();
}

CaptureData dipper_data() {
  CaptureData d{};
  d.R = {22, 60, 78, 80, 88, 98};
  d.x[1][2] = 11;
  d.x[1][3] = 2;
  d.x[2][3] = 24;
  d.x[2][4] = 1;
  d.x[3][4] = 34;
  d.x[3][5] = 2;
  d.x[4][5] = 45;
  d.x[4][6] = 1;
  d.x[4][7] = 2;
  d.x[5][6] = 51;
  d.x[5][7] = 0;
  d.x[6][7] = 52;
  return d;
}

namespace {
inline double phi_par(const double* theta, int i) { return theta[i - 1]; }    // i in 1..6
inline double p_par(const double* theta, int j) { return theta[4 + j]; }      // j in 2..7
}  // namespace

double capture_nu(const double* theta, int i, int j) {
  double run = phi_par(theta, i);
  for (int k = i + 1; k < j; ++k) run *= phi_par(theta, k) * (1.0 - p_par(theta, k));
  return run * p_par(theta, j);
}

double capture_loglik(const CaptureData& data, const double* theta) {
  const double neg_inf = -std::numeric_limits<double>::infinity();
  auto r = data.never_recaptured();
  double ll = 0.0;
  for (int i = 1; i <= 6; ++i) {
    double run = phi_par(theta, i);
    double sum_nu = 0.0;
    for (int j = i + 1; j <= 7; ++j) {
      double nu = run * p_par(theta, j);
      sum_nu += nu;
      if (data.x[i][j] > 0) {
        if (nu <= 0.0) return neg_inf;
        ll += data.x[i][j] * std::log(nu);
      }
      if (j < 7) run *= phi_par(theta, j) * (1.0 - p_par(theta, j));
    }
    double chi = 1.0 - sum_nu;
    if (r[static_cast<std::size_t>(i - 1)] > 0) {
      if (chi <= 0.0) return neg_inf;
      ll += r[static_cast<std::size_t>(i - 1)] * std::log(chi);
    }
  }
  return ll;
}

double capture_likelihood(const CaptureData& data, const double* theta) {
  return std::exp(capture_loglik(data, theta));
}

SonarData load_sonar(const std::string& path, int expect_rows) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("load_sonar: cannot open " + path);
  std::vector<std::array<double, 60>> feats;
  std::vector<double> labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> fields;
    while (std::getline(ss, tok, ',')) fields.push_back(tok);
    if (fields.size() != 61)
      throw std::runtime_error("load_sonar: line " + std::to_string(lineno) + " has " +
                               std::to_string(fields.size()) + " fields, want 61");
    std::array<double, 60> row{};
    for (int c = 0; c < 60; ++c) {
      try {
        row[static_cast<std::size_t>(c)] = std::stod(fields[static_cast<std::size_t>(c)]);
      } catch (const std::exception&) {
        throw std::runtime_error("load_sonar: line " + std::to_string(lineno) +
                                 ": bad number '" + fields[static_cast<std::size_t>(c)] + "'");
      }
    }
    const std::string& label = fields[60];
    if (label == "M")
      labels.push_back(1.0);
    else if (label == "R")
      labels.push_back(-1.0);
    else
      throw std::runtime_error("load_sonar: line " + std::to_string(lineno) +
                               ": label must be M or R, got '" + label + "'");
    feats.push_back(row);
  }
  if (static_cast<int>(labels.size()) != expect_rows)
    throw std::runtime_error("load_sonar: got " + std::to_string(labels.size()) +
                             " rows, want " + std::to_string(expect_rows));
  SonarData data;
  const Eigen::Index n = static_cast<Eigen::Index>(labels.size());
  data.X.resize(n, 61);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.X(i, 0) = 1.0;
    for (int c = 0; c < 60; ++c)
      data.X(i, c + 1) = feats[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    data.y(i) = labels[static_cast<std::size_t>(i)];
  }
  return data;
}

namespace {
// log(1 + exp(-t)) without overflow on either tail.
inline double log1p_exp_neg(double t) {
  if (t > 0.0) return std::log1p(std::exp(-t));
  return -t + std::log1p(std::exp(t));
}
}  // namespace

double sonar_loglik(const SonarData& data, const double* theta) {
  Eigen::Map<const Eigen::VectorXd> th(theta, data.X.cols());
  Eigen::VectorXd margins = data.X * th;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i)
    ll -= log1p_exp_neg(data.y(i) * margins(i));
  return ll;
}

Eigen::VectorXd sonar_loglik_batch(const SonarData& data,
                                   const Eigen::Ref<const Eigen::MatrixXd>& thetas) {
  if (thetas.cols() != data.X.cols())
    throw std::invalid_argument("sonar_loglik_batch: dimension mismatch");
  Eigen::MatrixXd margins = thetas * data.X.transpose();  // points x observations
  Eigen::VectorXd out(thetas.rows());
  for (Eigen::Index r = 0; r < thetas.rows(); ++r) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < data.y.size(); ++i)
      ll -= log1p_exp_neg(data.y(i) * margins(r, i));
    out(r) = ll;
  }
  return out;
}

}  // namespace cvmc
