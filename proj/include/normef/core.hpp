// Copyright 2026 The normef Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#ifndef NORMEF_CORE_HPP
#define NORMEF_CORE_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace normef {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& what, std::size_t expected,
                 std::size_t actual)
      : std::invalid_argument(what + ": expected dimension " +
                              std::to_string(expected) + ", got " +
                              std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// Configuration problem attributable to a named field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Non-finite value detected while iterating; carries the step index.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::size_t step, const std::string& what)
      : std::runtime_error("numerical failure at t=" + std::to_string(step) +
                           ": " + what),
        step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

inline void check_dimension(const char* what, Eigen::Index expected,
                            Eigen::Index actual) {
  if (expected != actual)
    throw DimensionError(what, static_cast<std::size_t>(expected),
                         static_cast<std::size_t>(actual));
}

/// Euclidean norm.
template <typename Derived>
typename Derived::RealScalar norm(const Eigen::MatrixBase<Derived>& v) {
  return v.norm();
}

/// Returns a * x + y.
template <typename Scalar, typename DerivedX, typename DerivedY>
VectorX<typename DerivedX::Scalar> axpy(Scalar a,
                                        const Eigen::MatrixBase<DerivedX>& x,
                                        const Eigen::MatrixBase<DerivedY>& y) {
  check_dimension("axpy", x.size(), y.size());
  return a * x + y;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

}  // namespace normef

#endif  // NORMEF_CORE_HPP
