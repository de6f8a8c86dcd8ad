#include "stgc/init.hpp"

#include <cmath>
#include <stdexcept>

namespace stgc {

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("glorot_uniform: dimensions must be positive");
  double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double stddev) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("gaussian: dimensions must be positive");
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace stgc
