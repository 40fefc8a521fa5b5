// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "crpl/embedding.hpp"

namespace crpl {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); streams keep unrelated draws
/// (encoder weights, token init, shuffles) from shifting each other.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev);
Vector gaussian_vector(Rng& rng, Eigen::Index size, double stddev);

/// rows x cols matrix with orthonormal columns (rows >= cols) or rows.
Matrix random_orthogonal(Rng& rng, Eigen::Index rows, Eigen::Index cols);

}  // namespace crpl
