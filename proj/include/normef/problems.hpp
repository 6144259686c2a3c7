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
#ifndef NORMEF_PROBLEMS_HPP
#define NORMEF_PROBLEMS_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "normef/core.hpp"
#include "normef/rng.hpp"

namespace normef {

/// Additive isotropic Gaussian noise with exact second moments:
/// E||z_g||^2 = sigma_g^2 and E||z_h||^2 = sigma_h^2 ||u||^2.
struct NoiseModel {
  double sigma_g = 0.0;
  double sigma_h = 0.0;
};

/// Smoothness and lower-bound constants, known analytically per instance.
struct ProblemConstants {
  double L = 0.0;                   // smoothness of f
  std::vector<double> L_i;          // smoothness of each f_i
  double L_bar = 0.0;               // mean of L_i
  double L_h = 0.0;                 // Hessian Lipschitz constant of f
  std::vector<double> L_h_i;        // Hessian Lipschitz constant of each f_i
  std::vector<double> L_ms_i;       // mean-squared smoothness of each oracle
  double f_inf = 0.0;
  bool f_inf_exact = true;          // false when estimated numerically
};

/// f(x) = (1/n) sum_i f_i(x) split across n clients.
///
/// Exact oracles are pure and const; the object is immutable after
/// construction and may be shared across threads.
class Problem {
 public:
  virtual ~Problem() = default;

  std::size_t num_clients() const { return n_; }
  std::size_t dim() const { return d_; }
  const ProblemConstants& constants() const { return constants_; }
  const NoiseModel& noise() const { return noise_; }
  virtual std::string name() const = 0;

  double value(std::size_t client, const Vector& x) const;
  Vector grad(std::size_t client, const Vector& x) const;
  Vector hvp(std::size_t client, const Vector& x, const Vector& u) const;

  double full_value(const Vector& x) const;
  Vector full_grad(const Vector& x) const;

 protected:
  Problem(std::size_t n, std::size_t d, NoiseModel noise);

  virtual double do_value(std::size_t client, const Vector& x) const = 0;
  virtual Vector do_grad(std::size_t client, const Vector& x) const = 0;
  virtual Vector do_hvp(std::size_t client, const Vector& x,
                        const Vector& u) const = 0;
  virtual double do_full_value(const Vector& x) const;
  virtual Vector do_full_grad(const Vector& x) const;

  ProblemConstants constants_;

 private:
  void check_client(std::size_t client) const;

  std::size_t n_;
  std::size_t d_;
  NoiseModel noise_;
};

using ProblemPtr = std::shared_ptr<const Problem>;

// Free-function oracle surface.
inline Vector grad(const Problem& p, std::size_t client, const Vector& x) {
  return p.grad(client, x);
}
inline Vector hvp(const Problem& p, std::size_t client, const Vector& x,
                  const Vector& u) {
  return p.hvp(client, x, u);
}
/// grad + z with z ~ N(0, sigma_g^2/d I). The draw depends only on the
/// stream, so equal streams give equal noise at any x.
Vector stoch_grad(const Problem& p, std::size_t client, const Vector& x,
                  RngStream rng);
/// hvp + z with z ~ N(0, sigma_h^2 ||u||^2 / d I).
Vector stoch_hvp(const Problem& p, std::size_t client, const Vector& x,
                 const Vector& u, RngStream rng);

/// f_i(x) = 1/2 x^T A_i x - b_i^T x with A_i symmetric PSD.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(std::vector<Matrix> A, std::vector<Vector> b,
                   NoiseModel noise = {});

  std::string name() const override { return "quadratic"; }
  const Matrix& A(std::size_t client) const { return A_[client]; }
  const Vector& b(std::size_t client) const { return b_[client]; }
  const Matrix& A_mean() const { return A_mean_; }
  const Vector& b_mean() const { return b_mean_; }
  /// Global minimizer of f.
  const Vector& minimizer() const { return x_star_; }

 private:
  double do_value(std::size_t client, const Vector& x) const override;
  Vector do_grad(std::size_t client, const Vector& x) const override;
  Vector do_hvp(std::size_t client, const Vector& x,
                const Vector& u) const override;
  double do_full_value(const Vector& x) const override;
  Vector do_full_grad(const Vector& x) const override;

  std::vector<Matrix> A_;
  std::vector<Vector> b_;
  Matrix A_mean_;
  Vector b_mean_;
  Vector x_star_;
};

/// f_i(x) = (1/m_i) sum_j log(1 + exp(-y_j a_j^T x)) + lambda/2 ||x||^2.
class LogisticProblem final : public Problem {
 public:
  /// features[i] is m_i x d; labels[i] holds +-1 per row.
  LogisticProblem(std::vector<Matrix> features, std::vector<Vector> labels,
                  double lambda, NoiseModel noise = {});

  std::string name() const override { return "logreg"; }
  const Matrix& features(std::size_t client) const { return X_[client]; }
  const Vector& labels(std::size_t client) const { return y_[client]; }
  double lambda() const { return lambda_; }

 private:
  double do_value(std::size_t client, const Vector& x) const override;
  Vector do_grad(std::size_t client, const Vector& x) const override;
  Vector do_hvp(std::size_t client, const Vector& x,
                const Vector& u) const override;

  double estimate_f_inf() const;

  std::vector<Matrix> X_;
  std::vector<Vector> y_;
  double lambda_;
};

/// Label-sorted logistic data with class bookkeeping exposed for tests.
struct LabeledShards {
  std::shared_ptr<const LogisticProblem> problem;
  std::vector<std::vector<int>> classes;  // class id per row, per client
  std::size_t num_classes = 0;
};

/// Each A_i = Q_i diag(lambda) Q_i^T with spectrum spanning [1/condition, 1]
/// (so L_i = 1); b_i = b_mean + heterogeneity * delta_i with sum delta_i = 0.
std::shared_ptr<const QuadraticProblem> make_hetero_quadratics(
    std::size_t n, std::size_t d, double heterogeneity, double condition,
    std::uint64_t seed, NoiseModel noise = {});

/// Gaussian-blob classification split across n clients: for every class a
/// sorted_fraction of its samples goes to the client owning that class, the
/// rest is shuffled and dealt evenly. Labels are +1 for even classes.
LabeledShards make_label_sorted_logreg(std::size_t n, std::size_t d,
                                       std::size_t samples_per_client,
                                       double sorted_fraction,
                                       std::uint64_t seed, double lambda = 1e-2,
                                       NoiseModel noise = {});

/// Generator name plus parameters; enough to rebuild an instance.
struct ProblemSpec {
  std::string generator = "quadratic";  // quadratic | logreg
  double heterogeneity = 1.0;
  double condition = 10.0;
  std::size_t samples_per_client = 50;
  double sorted_fraction = 0.5;
  double lambda = 1e-2;
  std::uint64_t seed = 0;
  NoiseModel noise;
};

ProblemPtr make_problem(const ProblemSpec& spec, std::size_t n, std::size_t d);

}  // namespace normef

#endif  // NORMEF_PROBLEMS_HPP
