// SPDX-License-Identifier: Apache-2.0
#include "crpl/random.hpp"

#include <Eigen/QR>

namespace crpl {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  // Row-major fill order so the draw sequence matches the on-disk layout.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

Vector gaussian_vector(Rng& rng, Eigen::Index size, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = normal(rng);
  return v;
}

Matrix random_orthogonal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const bool tall = rows >= cols;
  const Eigen::Index n = tall ? rows : cols;
  const Eigen::Index m = tall ? cols : rows;
  const Matrix g = gaussian_matrix(rng, n, m, 1.0);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, m);
  const Matrix r = qr.matrixQR();
  for (Eigen::Index j = 0; j < m; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return tall ? q : Matrix(q.transpose());
}

}  // namespace crpl
