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
#include "normef/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace normef {

Problem::Problem(std::size_t n, std::size_t d, NoiseModel noise)
    : n_(n), d_(d), noise_(noise) {
  if (n == 0) throw ConfigError("clients", "must be at least 1");
  if (d == 0) throw ConfigError("dim", "must be at least 1");
  if (!(noise.sigma_g >= 0.0) || !(noise.sigma_h >= 0.0))
    throw ConfigError("sigma", "noise levels must be nonnegative");
}

void Problem::check_client(std::size_t client) const {
  if (client >= n_)
    throw std::out_of_range("client index " + std::to_string(client) +
                            " out of range [0, " + std::to_string(n_) + ")");
}

double Problem::value(std::size_t client, const Vector& x) const {
  check_client(client);
  check_dimension("value", static_cast<Eigen::Index>(d_), x.size());
  return do_value(client, x);
}

Vector Problem::grad(std::size_t client, const Vector& x) const {
  check_client(client);
  check_dimension("grad", static_cast<Eigen::Index>(d_), x.size());
  return do_grad(client, x);
}

Vector Problem::hvp(std::size_t client, const Vector& x, const Vector& u) const {
  check_client(client);
  check_dimension("hvp", static_cast<Eigen::Index>(d_), x.size());
  check_dimension("hvp direction", static_cast<Eigen::Index>(d_), u.size());
  return do_hvp(client, x, u);
}

double Problem::full_value(const Vector& x) const {
  check_dimension("full_value", static_cast<Eigen::Index>(d_), x.size());
  return do_full_value(x);
}

Vector Problem::full_grad(const Vector& x) const {
  check_dimension("full_grad", static_cast<Eigen::Index>(d_), x.size());
  return do_full_grad(x);
}

double Problem::do_full_value(const Vector& x) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < n_; ++i) sum += do_value(i, x);
  return sum / static_cast<double>(n_);
}

Vector Problem::do_full_grad(const Vector& x) const {
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(d_));
  for (std::size_t i = 0; i < n_; ++i) sum += do_grad(i, x);
  return sum / static_cast<double>(n_);
}

Vector stoch_grad(const Problem& p, std::size_t client, const Vector& x,
                  RngStream rng) {
  Vector g = p.grad(client, x);
  const double sigma = p.noise().sigma_g;
  if (sigma > 0.0) {
    const auto d = g.size();
    g += rng.gaussian(d, sigma / std::sqrt(static_cast<double>(d)));
  }
  return g;
}

Vector stoch_hvp(const Problem& p, std::size_t client, const Vector& x,
                 const Vector& u, RngStream rng) {
  Vector h = p.hvp(client, x, u);
  const double scale = p.noise().sigma_h * u.norm();
  if (scale > 0.0) {
    const auto d = h.size();
    h += rng.gaussian(d, scale / std::sqrt(static_cast<double>(d)));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Quadratics

namespace {

double largest_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

std::size_t checked_size(const std::vector<Matrix>& A) {
  if (A.empty()) throw ConfigError("clients", "must be at least 1");
  return A.size();
}

}  // namespace

QuadraticProblem::QuadraticProblem(std::vector<Matrix> A, std::vector<Vector> b,
                                   NoiseModel noise)
    : Problem(checked_size(A), static_cast<std::size_t>(A.front().rows()), noise),
      A_(std::move(A)),
      b_(std::move(b)) {
  const std::size_t n = num_clients();
  const auto d = static_cast<Eigen::Index>(dim());
  if (b_.size() != n) throw ConfigError("b", "one vector per client required");

  A_mean_ = Matrix::Zero(d, d);
  b_mean_ = Vector::Zero(d);
  constants_.L_i.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    check_dimension("quadratic A rows", d, A_[i].rows());
    check_dimension("quadratic A cols", d, A_[i].cols());
    check_dimension("quadratic b", d, b_[i].size());
    const double asym = (A_[i] - A_[i].transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, A_[i].cwiseAbs().maxCoeff()))
      throw ConfigError("A", "client " + std::to_string(i) + " matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(A_[i], Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, lmax))
      throw ConfigError("A", "client " + std::to_string(i) + " matrix not PSD");
    constants_.L_i[i] = std::max(0.0, lmax);
    A_mean_ += A_[i];
    b_mean_ += b_[i];
  }
  A_mean_ /= static_cast<double>(n);
  b_mean_ /= static_cast<double>(n);

  constants_.L = std::max(0.0, largest_eigenvalue(A_mean_));
  constants_.L_bar = std::accumulate(constants_.L_i.begin(), constants_.L_i.end(), 0.0) /
                     static_cast<double>(n);
  constants_.L_h = 0.0;
  constants_.L_h_i.assign(n, 0.0);
  // Additive noise leaves the oracle's mean-squared smoothness equal to L_i.
  constants_.L_ms_i = constants_.L_i;

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A_mean_);
  x_star_ = cod.solve(b_mean_);
  if ((A_mean_ * x_star_ - b_mean_).norm() > 1e-8 * std::max(1.0, b_mean_.norm()))
    throw ConfigError("b", "mean linear term outside the range of mean A; f is unbounded below");
  constants_.f_inf = -0.5 * b_mean_.dot(x_star_);
  constants_.f_inf_exact = true;
}

double QuadraticProblem::do_value(std::size_t client, const Vector& x) const {
  return 0.5 * x.dot(A_[client] * x) - b_[client].dot(x);
}

Vector QuadraticProblem::do_grad(std::size_t client, const Vector& x) const {
  Vector g(x.size());
  g.noalias() = A_[client].selfadjointView<Eigen::Lower>() * x;
  g -= b_[client];
  return g;
}

Vector QuadraticProblem::do_hvp(std::size_t client, const Vector&,
                                const Vector& u) const {
  Vector h(u.size());
  h.noalias() = A_[client].selfadjointView<Eigen::Lower>() * u;
  return h;
}

double QuadraticProblem::do_full_value(const Vector& x) const {
  return 0.5 * x.dot(A_mean_ * x) - b_mean_.dot(x);
}

Vector QuadraticProblem::do_full_grad(const Vector& x) const {
  Vector g(x.size());
  g.noalias() = A_mean_ * x;
  g -= b_mean_;
  return g;
}

std::shared_ptr<const QuadraticProblem> make_hetero_quadratics(
    std::size_t n, std::size_t d, double heterogeneity, double condition,
    std::uint64_t seed, NoiseModel noise) {
  if (n == 0) throw ConfigError("clients", "must be at least 1");
  if (d == 0) throw ConfigError("dim", "must be at least 1");
  if (!(heterogeneity >= 0.0)) throw ConfigError("heterogeneity", "must be >= 0");
  if (!(condition >= 1.0)) throw ConfigError("condition", "must be >= 1");

  const auto dd = static_cast<Eigen::Index>(d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  RngStream root = derive_stream(seed, {"quadratic"});

  std::vector<Matrix> A(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng = root.derive({"A", i});
    // Spectrum: endpoints 1 and 1/condition, interior log-uniform.
    Vector spectrum(dd);
    const double log_min = -std::log(condition);
    for (Eigen::Index j = 0; j < dd; ++j)
      spectrum[j] = std::exp(log_min * rng.uniform01());
    spectrum[0] = 1.0;
    if (dd > 1) spectrum[dd - 1] = 1.0 / condition;

    Matrix gauss(dd, dd);
    for (Eigen::Index c = 0; c < dd; ++c) gauss.col(c) = rng.gaussian(dd, 1.0);
    Matrix Q = Eigen::HouseholderQR<Matrix>(gauss).householderQ();
    Matrix Ai = Q * spectrum.asDiagonal() * Q.transpose();
    A[i] = 0.5 * (Ai + Ai.transpose());
    if (condition == 1.0) A[i] = Matrix::Identity(dd, dd);
  }

  RngStream brng = root.derive("b");
  Vector b_mean = brng.gaussian(dd, scale);
  std::vector<Vector> delta(n);
  Vector delta_mean = Vector::Zero(dd);
  for (std::size_t i = 0; i < n; ++i) {
    delta[i] = root.derive({"delta", i}).gaussian(dd, scale);
    delta_mean += delta[i];
  }
  delta_mean /= static_cast<double>(n);

  std::vector<Vector> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (heterogeneity == 0.0)
      b[i] = b_mean;
    else
      b[i] = b_mean + heterogeneity * (delta[i] - delta_mean);
  }
  return std::make_shared<QuadraticProblem>(std::move(A), std::move(b), noise);
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

// log(1 + exp(-z)) without overflow.
double softplus_neg(double z) {
  return std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::size_t checked_size(const std::vector<Matrix>& X, const std::vector<Vector>& y) {
  if (X.empty()) throw ConfigError("clients", "must be at least 1");
  if (X.size() != y.size()) throw ConfigError("labels", "one label vector per client required");
  return X.size();
}

// Bound on |d/dz sigma(z)(1 - sigma(z))|.
constexpr double kLogisticThirdDerivative = 0.09622504486493763;  // 1/(6 sqrt 3)

}  // namespace

LogisticProblem::LogisticProblem(std::vector<Matrix> features,
                                 std::vector<Vector> labels, double lambda,
                                 NoiseModel noise)
    : Problem(checked_size(features, labels),
              static_cast<std::size_t>(features.front().cols()), noise),
      X_(std::move(features)),
      y_(std::move(labels)),
      lambda_(lambda) {
  if (!(lambda_ >= 0.0)) throw ConfigError("lambda", "must be >= 0");
  const std::size_t n = num_clients();
  const auto d = static_cast<Eigen::Index>(dim());

  constants_.L_i.resize(n);
  constants_.L_h_i.resize(n);
  Matrix gram_mean = Matrix::Zero(d, d);
  double max_row_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    check_dimension("logreg features", d, X_[i].cols());
    check_dimension("logreg labels", X_[i].rows(), y_[i].size());
    if (X_[i].rows() == 0) throw ConfigError("samples_per_client", "client holds no samples");
    for (Eigen::Index r = 0; r < y_[i].size(); ++r)
      if (y_[i][r] != 1.0 && y_[i][r] != -1.0)
        throw ConfigError("labels", "labels must be +1 or -1");
    const double m = static_cast<double>(X_[i].rows());
    Matrix gram = X_[i].transpose() * X_[i] / m;
    const double lmax = largest_eigenvalue(gram);
    const double row_norm = X_[i].rowwise().norm().maxCoeff();
    max_row_norm = std::max(max_row_norm, row_norm);
    constants_.L_i[i] = lambda_ + 0.25 * lmax;
    constants_.L_h_i[i] = kLogisticThirdDerivative * row_norm * lmax;
    gram_mean += gram;
  }
  gram_mean /= static_cast<double>(n);
  const double lmax_mean = largest_eigenvalue(gram_mean);
  constants_.L = lambda_ + 0.25 * lmax_mean;
  constants_.L_bar = std::accumulate(constants_.L_i.begin(), constants_.L_i.end(), 0.0) /
                     static_cast<double>(n);
  constants_.L_h = kLogisticThirdDerivative * max_row_norm * lmax_mean;
  constants_.L_ms_i = constants_.L_i;
  constants_.f_inf = estimate_f_inf();
  constants_.f_inf_exact = false;
}

double LogisticProblem::do_value(std::size_t client, const Vector& x) const {
  const Vector margins = (X_[client] * x).cwiseProduct(y_[client]);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < margins.size(); ++r) loss += softplus_neg(margins[r]);
  return loss / static_cast<double>(margins.size()) + 0.5 * lambda_ * x.squaredNorm();
}

Vector LogisticProblem::do_grad(std::size_t client, const Vector& x) const {
  const Matrix& X = X_[client];
  const Vector& y = y_[client];
  Vector margins = (X * x).cwiseProduct(y);
  // d/dz log(1 + e^{-z}) = -sigma(-z)
  Vector weights(margins.size());
  for (Eigen::Index r = 0; r < margins.size(); ++r)
    weights[r] = -sigmoid(-margins[r]) * y[r];
  Vector g = X.transpose() * weights / static_cast<double>(X.rows());
  g += lambda_ * x;
  return g;
}

Vector LogisticProblem::do_hvp(std::size_t client, const Vector& x,
                               const Vector& u) const {
  const Matrix& X = X_[client];
  Vector margins = (X * x).cwiseProduct(y_[client]);
  Vector Xu = X * u;
  for (Eigen::Index r = 0; r < margins.size(); ++r) {
    const double s = sigmoid(margins[r]);
    Xu[r] *= s * (1.0 - s);
  }
  Vector h = X.transpose() * Xu / static_cast<double>(X.rows());
  h += lambda_ * u;
  return h;
}

double LogisticProblem::estimate_f_inf() const {
  // Accelerated gradient descent to high accuracy; the result upper-bounds
  // the true infimum by at most the residual suboptimality.
  const auto d = static_cast<Eigen::Index>(dim());
  const double L = std::max(constants_.L, 1e-12);
  const double beta_strong =
      lambda_ > 0.0 ? (std::sqrt(L / lambda_) - 1.0) / (std::sqrt(L / lambda_) + 1.0) : 0.0;
  Vector x = Vector::Zero(d);
  Vector y = x;
  for (int k = 0; k < 200000; ++k) {
    Vector g = do_full_grad(y);
    Vector x_next = y - g / L;
    const double beta = lambda_ > 0.0 ? beta_strong : static_cast<double>(k) / (k + 3.0);
    y = x_next + beta * (x_next - x);
    x = std::move(x_next);
    if (k % 50 == 0 && do_full_grad(x).norm() < 1e-11) break;
  }
  return do_full_value(x);
}

LabeledShards make_label_sorted_logreg(std::size_t n, std::size_t d,
                                       std::size_t samples_per_client,
                                       double sorted_fraction, std::uint64_t seed,
                                       double lambda, NoiseModel noise) {
  if (n == 0) throw ConfigError("clients", "must be at least 1");
  if (d == 0) throw ConfigError("dim", "must be at least 1");
  if (samples_per_client == 0) throw ConfigError("samples_per_client", "must be at least 1");
  if (!(sorted_fraction >= 0.0 && sorted_fraction <= 1.0))
    throw ConfigError("sorted_fraction", "must lie in [0, 1]");

  const std::size_t C = std::max<std::size_t>(n, 2);
  const std::size_t total = n * samples_per_client;
  const auto dd = static_cast<Eigen::Index>(d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  RngStream root = derive_stream(seed, {"logreg"});

  std::vector<Vector> centers(C);
  for (std::size_t c = 0; c < C; ++c) centers[c] = root.derive({"center", c}).gaussian(dd, 2.0 * scale);

  // Balanced classes; sample j belongs to class j mod C.
  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t j = 0; j < total; ++j) by_class[j % C].push_back(j);

  RngStream shuffle_rng = root.derive("shuffle");
  std::vector<std::size_t> sorted_part, random_part;
  for (std::size_t c = 0; c < C; ++c) {
    auto& members = by_class[c];
    const auto keep = static_cast<std::size_t>(
        std::floor(sorted_fraction * static_cast<double>(members.size())));
    sorted_part.insert(sorted_part.end(), members.begin(), members.begin() + keep);
    random_part.insert(random_part.end(), members.begin() + keep, members.end());
  }
  std::shuffle(random_part.begin(), random_part.end(), shuffle_rng);

  // Sorted part is class-ordered; cut into n contiguous chunks.
  std::vector<std::vector<std::size_t>> owned(n);
  for (std::size_t pos = 0; pos < sorted_part.size(); ++pos)
    owned[pos * n / sorted_part.size()].push_back(sorted_part[pos]);
  for (std::size_t pos = 0; pos < random_part.size(); ++pos) {
    // Top up clients in order so every shard ends with samples_per_client rows.
    std::size_t client = 0;
    while (owned[client].size() >= samples_per_client && client + 1 < n) ++client;
    owned[client].push_back(random_part[pos]);
  }

  LabeledShards out;
  out.num_classes = C;
  out.classes.resize(n);
  std::vector<Matrix> X(n);
  std::vector<Vector> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = static_cast<Eigen::Index>(owned[i].size());
    X[i].resize(m, dd);
    y[i].resize(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const std::size_t j = owned[i][static_cast<std::size_t>(r)];
      const std::size_t c = j % C;
      X[i].row(r) = (centers[c] + root.derive({"sample", j}).gaussian(dd, scale)).transpose();
      y[i][r] = (c % 2 == 0) ? 1.0 : -1.0;
      out.classes[i].push_back(static_cast<int>(c));
    }
  }
  out.problem = std::make_shared<LogisticProblem>(std::move(X), std::move(y), lambda, noise);
  return out;
}

ProblemPtr make_problem(const ProblemSpec& spec, std::size_t n, std::size_t d) {
  if (spec.generator == "quadratic")
    return make_hetero_quadratics(n, d, spec.heterogeneity, spec.condition, spec.seed,
                                  spec.noise);
  if (spec.generator == "logreg")
    return make_label_sorted_logreg(n, d, spec.samples_per_client, spec.sorted_fraction,
                                    spec.seed, spec.lambda, spec.noise)
        .problem;
  throw ConfigError("problem", "unknown generator '" + spec.generator +
                                   "' (expected quadratic or logreg)");
}

}  // namespace normef
