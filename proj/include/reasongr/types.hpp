#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace reasongr {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// All explicit randomness flows through this engine; there is no global RNG.
using Rng = std::mt19937_64;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace reasongr
