#include "cvmc/rng.hpp"

#include <stdexcept>

namespace cvmc {

Eigen::MatrixXd sample_uniform_rows(Eigen::Index d, Eigen::Index row0, Eigen::Index n,
                                    std::uint64_t seed) {
  if (d <= 0 || n < 0 || row0 < 0) throw std::invalid_argument("sample_uniform: bad shape");
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint64_t base = static_cast<std::uint64_t>(row0 + i) * static_cast<std::uint64_t>(d);
    for (Eigen::Index j = 0; j < d; ++j)
      x(i, j) = u01(counter_draw(seed, base + static_cast<std::uint64_t>(j)));
  }
  return x;
}

Eigen::MatrixXd sample_uniform(Eigen::Index d, Eigen::Index n, std::uint64_t seed) {
  return sample_uniform_rows(d, 0, n, seed);
}

}  // namespace cvmc
