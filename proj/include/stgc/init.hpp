#pragma once

#include <random>

#include "stgc/tape.hpp"

namespace stgc {

using Rng = std::mt19937_64;

/// Uniform draw in +-sqrt(6 / (rows + cols)).
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Elementwise N(0, stddev^2).
Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double stddev = 1.0);

inline Parameter glorot_param(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  return Parameter(glorot_uniform(rows, cols, rng));
}

inline Parameter zero_param(Eigen::Index rows, Eigen::Index cols) {
  return Parameter(Matrix::Zero(rows, cols));
}

}  // namespace stgc
