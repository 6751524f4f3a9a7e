#pragma once

#include <Eigen/Dense>

namespace cvmc {

// Digit reversal of i in the given base, mapped to [0,1).
double radical_inverse(int base, long long i);

// First n Halton points in dimension d (bases = first d primes, start index 1,
// unscrambled). d is capped at 20; quality degrades in higher bases.
Eigen::MatrixXd halton_points(Eigen::Index d, Eigen::Index n);

}  // namespace cvmc
