#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

namespace cvmc {

enum class BasisFamily { LegendreShifted, Fourier };

struct MultiIndex {
  std::vector<int> degrees;
  int total_degree = 0;
};

// Tensor-product control-variate family on [0,1]^d. Each multi-index l with
// 0 < |l|_1 <= deg and l_j <= k names the control h_l(x) = prod_j h_{l_j}(x_j),
// h_0 == 1. Indices are sorted by total degree, ties lexicographic, so column
// positions are reproducible.
struct BasisSpec {
  BasisFamily family = BasisFamily::LegendreShifted;
  int d = 1;
  int k = 1;
  int deg = 1;
  int max_active = -1;  // cap on nonzero coordinates per index; -1 = none
  std::vector<MultiIndex> indices;

  Eigen::Index m() const { return static_cast<Eigen::Index>(indices.size()); }
};

struct BasisDiagnostics {
  Eigen::VectorXd gram_diagonal;  // P(h_l^2) per index, closed form
  double gamma = 0;               // smallest Gram eigenvalue
  double u_h = 0;                 // sup-norm bound on any single control
  double b_bound = 0;             // upper bound on B = sup_x h' G^-1 h
};

// Shifted Legendre polynomial L_j(2x-1) by the three-term recurrence.
double legendre_eval(int j, double x);

// Fills out[0..k] with L_0(2x-1) .. L_k(2x-1).
void legendre_all(int k, double x, double* out);

// Fourier family on [0,1]: sqrt(2)cos((j+1) pi x) for odd j, sqrt(2)sin(j pi x)
// for even j; j >= 1.
double fourier_eval(int j, double x);

// All multi-indices in {0..k}^d \ {0} with total degree <= deg (and at most
// max_active nonzero coordinates when max_active >= 0), sorted by total degree
// then lexicographically. Throws std::length_error past `cap` indices.
std::vector<MultiIndex> enumerate_indices(int d, int k, int deg, int max_active = -1,
                                          std::size_t cap = 1000000);

BasisSpec make_basis(BasisFamily family, int d, int k, int deg, int max_active = -1);

double eval_control(const BasisSpec& spec, const MultiIndex& idx, const double* x);

// H[i][j] = h_{index j}(point i); columns follow spec.indices.
Eigen::MatrixXd build_design(const BasisSpec& spec,
                             const Eigen::Ref<const Eigen::MatrixXd>& points);

BasisDiagnostics diagnostics(const BasisSpec& spec);

std::string to_json(const BasisSpec& spec);
BasisSpec basis_from_json(const std::string& text);

}  // namespace cvmc
