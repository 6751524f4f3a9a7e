#include "cvmc/qmc.hpp"

#include <array>
#include <stdexcept>

namespace cvmc {

namespace {
constexpr std::array<int, 20> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                         31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
}

double radical_inverse(int base, long long i) {
  if (base < 2 || i < 1) throw std::invalid_argument("radical_inverse: base >= 2, i >= 1");
  double f = 1.0;
  double r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

Eigen::MatrixXd halton_points(Eigen::Index d, Eigen::Index n) {
  if (d < 1 || d > static_cast<Eigen::Index>(kPrimes.size()))
    throw std::invalid_argument("halton_points: 1 <= d <= 20");
  if (n < 0) throw std::invalid_argument("halton_points: n >= 0");
  Eigen::MatrixXd pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      pts(i, j) = radical_inverse(kPrimes[static_cast<std::size_t>(j)], i + 1);
  return pts;
}

}  // namespace cvmc
