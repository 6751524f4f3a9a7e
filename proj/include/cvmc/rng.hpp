#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace cvmc {

// SplitMix64 output function. counter_draw(seed, i) equals the (i+1)-th output
// of the sequential generator seeded with `seed`, so draws are a pure function
// of (seed, index) and can be produced in any order or in parallel.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t counter_draw(std::uint64_t seed, std::uint64_t i) {
  return mix64(seed + (i + 1) * 0x9E3779B97F4A7C15ULL);
}

// Map 64 random bits to the open interval (0,1); exact dyadic rational,
// identical on every IEEE-754 platform, never 0 or 1.
inline double u01(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1p-52;
}

// Replicate r of a run with master seed s draws from stream s ^ r.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replicate) {
  return master ^ replicate;
}

// n x d matrix of i.i.d. uniforms on (0,1). Entry (i,j) uses flat index i*d+j.
Eigen::MatrixXd sample_uniform(Eigen::Index d, Eigen::Index n, std::uint64_t seed);

// Rows [row0, row0+n) of the same infinite point stream; sample_uniform(d,n,s)
// equals sample_uniform_rows(d, 0, n, s). Used to stream large batches.
Eigen::MatrixXd sample_uniform_rows(Eigen::Index d, Eigen::Index row0, Eigen::Index n,
                                    std::uint64_t seed);

}  // namespace cvmc
