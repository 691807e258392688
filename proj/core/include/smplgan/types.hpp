#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace smplgan {

// Row-major throughout: a (rows x cols) block reinterpreted with reshape keeps
// the natural C ordering, and per-sample rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

}  // namespace smplgan
