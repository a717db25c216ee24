// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "vitslim/tensor.hpp"

namespace vitslim::detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <typename T>
Eigen::Map<RowMatrix<T>> map(Tensor<T>& t) {
  return {t.ptr(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
Eigen::Map<const RowMatrix<T>> map(const Tensor<T>& t) {
  return {t.ptr(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
Eigen::Map<const RowVector<T>> map_row(const Tensor<T>& t) {
  return {t.ptr(), static_cast<Eigen::Index>(t.size())};
}

}  // namespace vitslim::detail
