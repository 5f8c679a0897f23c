// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>

namespace fgs {

/// Array shapes or configuration values that do not fit together.
class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or missing input data (files, scenes, point clouds).
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// NaN/Inf encountered in a loss or gradient.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace fgs
