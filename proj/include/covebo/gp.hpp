// Copyright 2026 The Covebo Authors.
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

//
// Exact Gaussian-process regression with a constant mean and an ARD squared
// exponential kernel
//
//     k(x, x') = s^2 exp(-0.5 sum_j (x_j - x'_j)^2 / l_j^2)
//
// Hyperparameters are fitted by maximizing the log marginal likelihood with a
// projected L-BFGS in log-parameter space. Targets are standardized per model
// unless disabled; predictions are always reported in original units.
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "covebo/errors.hpp"
#include "covebo/random.hpp"

namespace covebo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct GPHyperparams {
  Vector lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-3;
  double constant_mean = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(lengthscales.size()); }

  /// Packed as (log l_1..log l_d, log s^2, log noise, mean).
  Vector to_vector() const {
    const auto d = lengthscales.size();
    Vector v(d + 3);
    v.head(d) = lengthscales.array().log().matrix();
    v[d] = std::log(signal_variance);
    v[d + 1] = std::log(noise_variance);
    v[d + 2] = constant_mean;
    return v;
  }

  static GPHyperparams from_vector(const Vector& v) {
    const auto d = v.size() - 3;
    GPHyperparams h;
    h.lengthscales = v.head(d).array().exp().matrix();
    h.signal_variance = std::exp(v[d]);
    h.noise_variance = std::exp(v[d + 1]);
    h.constant_mean = v[d + 2];
    return h;
  }
};

struct GPFitConfig {
  bool standardize = true;
  int restarts = 3;
  int max_iterations = 100;
  double gradient_tolerance = 1e-5;
  double lengthscale_min = 5e-3;
  double lengthscale_max = 10.0;
  double noise_min = 1e-6;
  double noise_max = 1e-1;
  double signal_min = 1e-2;
  double signal_max = 1e2;
  double mean_bound = 10.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-4;

/// Cholesky of `a + jitter * I`, escalating jitter from 1e-8 by factors of
/// 10 up to 1e-4.
inline Eigen::LLT<Matrix> robust_cholesky(const Matrix& a, double* jitter_used = nullptr) {
  const auto n = a.rows();
  for (double jitter = kJitterStart; jitter <= kJitterMax * 1.0000001; jitter *= 10.0) {
    Matrix b = a;
    b.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(b);
    if (llt.info() == Eigen::Success && (n == 0 || llt.matrixLLT().diagonal().minCoeff() > 0.0)) {
      if (jitter_used) *jitter_used = jitter;
      return llt;
    }
  }
  std::ostringstream msg;
  msg << "Cholesky factorization failed after jitter escalation to " << kJitterMax;
  throw NumericalError(msg.str());
}

inline Matrix cross_kernel(const GPHyperparams& h, const Matrix& a, const Matrix& b) {
  const Vector inv_l = h.lengthscales.cwiseInverse();
  const Matrix as = a * inv_l.asDiagonal();
  const Matrix bs = b * inv_l.asDiagonal();
  const Vector an = as.rowwise().squaredNorm();
  const Vector bn = bs.rowwise().squaredNorm();
  Matrix sq = (-2.0 * as * bs.transpose()).colwise() + an;
  sq.rowwise() += bn.transpose();
  return h.signal_variance * (-0.5 * sq.array().max(0.0)).exp().matrix();
}

// Projected L-BFGS minimization on a box. `fg(x, grad)` returns the value and
// fills the gradient; it may return +inf for infeasible points.
template <typename F>
Vector minimize_box(const F& fg, Vector x, const Vector& lower, const Vector& upper, int max_iterations,
                    double tolerance) {
  const auto n = x.size();
  x = x.cwiseMax(lower).cwiseMin(upper);
  Vector g(n);
  double f = fg(x, g);
  if (!std::isfinite(f)) return x;

  auto projected_gradient = [&](const Vector& xs, const Vector& gs) {
    Vector pg = gs;
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((xs[i] <= lower[i] && gs[i] > 0.0) || (xs[i] >= upper[i] && gs[i] < 0.0)) pg[i] = 0.0;
    }
    return pg;
  };

  std::deque<std::pair<Vector, Vector>> memory;
  constexpr std::size_t kMemory = 8;
  for (int iter = 0; iter < max_iterations; ++iter) {
    const Vector pg = projected_gradient(x, g);
    if (pg.norm() < tolerance) break;

    // Two-loop recursion on the free variables.
    Vector q = pg;
    std::vector<double> alpha(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
      const auto& [s, y] = memory[i];
      alpha[i] = s.dot(q) / y.dot(s);
      q -= alpha[i] * y;
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      q *= s.dot(y) / y.dot(y);
    } else {
      q *= 1.0 / std::max(1.0, pg.norm());
    }
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto& [s, y] = memory[i];
      const double beta = y.dot(q) / y.dot(s);
      q += (alpha[i] - beta) * s;
    }
    Vector dir = -q;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (pg[i] == 0.0) dir[i] = 0.0;
    }
    if (dir.dot(pg) >= 0.0) {
      memory.clear();
      dir = -pg / std::max(1.0, pg.norm());
    }

    double step = 1.0;
    bool accepted = false;
    Vector x_new(n), g_new(n);
    double f_new = f;
    for (int ls = 0; ls < 30; ++ls) {
      x_new = (x + step * dir).cwiseMax(lower).cwiseMin(upper);
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (memory.empty()) break;
      memory.clear();
      continue;
    }
    const Vector s = x_new - x;
    const Vector y = g_new - g;
    if (s.dot(y) > 1e-12) {
      memory.emplace_back(s, y);
      if (memory.size() > kMemory) memory.pop_front();
    }
    const double decrease = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    if (decrease < 1e-12 * std::max(1.0, std::abs(f))) break;
  }
  return x;
}

}  // namespace detail

struct LmlResult {
  double value = 0.0;
  Vector gradient;  // matches GPHyperparams::to_vector ordering
};

/// Exact log marginal likelihood log N(y | c 1, K + noise I) and its gradient
/// with respect to (log lengthscales, log signal variance, log noise, mean).
inline LmlResult gp_log_marginal_likelihood(const GPHyperparams& h, const Matrix& inputs,
                                            const Vector& targets) {
  const auto m = inputs.rows();
  const auto d = inputs.cols();
  if (m < 2) throw InputError("gp_log_marginal_likelihood: need at least two points");
  if (targets.size() != m) throw InputError("gp_log_marginal_likelihood: target count mismatch");
  if (h.lengthscales.size() != d) throw InputError("gp_log_marginal_likelihood: lengthscale count mismatch");

  const Matrix kf = detail::cross_kernel(h, inputs, inputs);
  Matrix kn = kf;
  kn.diagonal().array() += h.noise_variance;
  const auto llt = detail::robust_cholesky(kn);
  const Vector resid = targets.array() - h.constant_mean;
  const Vector alpha = llt.solve(resid);

  LmlResult out;
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.value = -0.5 * resid.dot(alpha) - 0.5 * log_det -
              0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi);

  // d LML / d theta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta)
  const Matrix kinv = llt.solve(Matrix::Identity(m, m));
  const Matrix w = alpha * alpha.transpose() - kinv;
  const Matrix wk = w.cwiseProduct(kf);

  out.gradient.resize(d + 3);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double inv_l2 = 1.0 / (h.lengthscales[j] * h.lengthscales[j]);
    double acc = 0.0;
    for (Eigen::Index b = 0; b < m; ++b) {
      const double xb = inputs(b, j);
      for (Eigen::Index a = 0; a < m; ++a) {
        const double diff = inputs(a, j) - xb;
        acc += wk(a, b) * diff * diff;
      }
    }
    out.gradient[j] = 0.5 * acc * inv_l2;
  }
  out.gradient[d] = 0.5 * wk.sum();
  out.gradient[d + 1] = 0.5 * h.noise_variance * w.trace();
  out.gradient[d + 2] = alpha.sum();
  return out;
}

struct GPPosterior {
  Vector mean;
  Matrix covariance;
};

/// Fitted exact GP. Immutable after construction; safe to share across threads.
class GPModel {
 public:
  GPModel(GPHyperparams hyperparams, Matrix inputs, Vector raw_targets, bool standardize,
          bool used_fallback = false)
      : hyperparams_(std::move(hyperparams)),
        inputs_(std::move(inputs)),
        raw_targets_(std::move(raw_targets)),
        used_fallback_(used_fallback) {
    const auto m = raw_targets_.size();
    if (standardize && m > 0) {
      target_mean_ = raw_targets_.mean();
      const double var =
          m > 1 ? (raw_targets_.array() - target_mean_).square().sum() / static_cast<double>(m - 1) : 0.0;
      target_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    targets_ = (raw_targets_.array() - target_mean_) / target_scale_;
    Matrix kn = detail::cross_kernel(hyperparams_, inputs_, inputs_);
    kn.diagonal().array() += hyperparams_.noise_variance;
    llt_ = detail::robust_cholesky(kn, &jitter_);
    alpha_ = llt_.solve((targets_.array() - hyperparams_.constant_mean).matrix());
  }

  const GPHyperparams& hyperparams() const { return hyperparams_; }
  const Matrix& training_inputs() const { return inputs_; }
  const Vector& training_targets() const { return targets_; }
  double target_mean() const { return target_mean_; }
  double target_scale() const { return target_scale_; }
  bool used_fallback() const { return used_fallback_; }
  double jitter() const { return jitter_; }
  std::size_t dim() const { return static_cast<std::size_t>(inputs_.cols()); }

  /// Posterior over the latent function at `points` (rows), original units.
  GPPosterior posterior(const Matrix& points, bool full_covariance = true) const {
    check_points(points);
    const Matrix ks = detail::cross_kernel(hyperparams_, inputs_, points);  // m x p
    GPPosterior out;
    out.mean = (ks.transpose() * alpha_).array() + hyperparams_.constant_mean;
    out.mean = out.mean.array() * target_scale_ + target_mean_;
    const Matrix v = llt_.matrixL().solve(ks);
    const double scale2 = target_scale_ * target_scale_;
    if (full_covariance) {
      Matrix kss = detail::cross_kernel(hyperparams_, points, points);
      kss.noalias() -= v.transpose() * v;
      out.covariance = 0.5 * (kss + kss.transpose()) * scale2;
    } else {
      out.covariance =
          ((hyperparams_.signal_variance - v.colwise().squaredNorm().array()).max(0.0) * scale2)
              .matrix()
              .transpose();
    }
    return out;
  }

 private:
  void check_points(const Matrix& points) const {
    if (points.cols() != inputs_.cols()) {
      throw InputError("GPModel: query dimension " + std::to_string(points.cols()) + " != " +
                       std::to_string(inputs_.cols()));
    }
  }

  GPHyperparams hyperparams_;
  Matrix inputs_;
  Vector raw_targets_;
  Vector targets_;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;
  bool used_fallback_ = false;
  double jitter_ = 0.0;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;
};

inline GPHyperparams prior_hyperparams(std::size_t dim, const GPFitConfig& config) {
  GPHyperparams h;
  h.lengthscales = Vector::Constant(static_cast<Eigen::Index>(dim),
                                    std::clamp(0.5, config.lengthscale_min, config.lengthscale_max));
  h.signal_variance = std::clamp(1.0, config.signal_min, config.signal_max);
  h.noise_variance = std::clamp(1e-3, config.noise_min, config.noise_max);
  h.constant_mean = 0.0;
  return h;
}

/// Fits hyperparameters by multi-start maximization of the log marginal
/// likelihood. All-identical inputs fall back to the prior hyperparameters
/// and set used_fallback().
///
/// The first start begins at `warm_start` when given (clamped to the bounds),
/// otherwise at the prior; later starts are random log-uniform draws.
inline GPModel fit_gp(const Matrix& inputs, const Vector& targets, const GPFitConfig& config = {},
                      const std::optional<GPHyperparams>& warm_start = std::nullopt) {
  const auto m = inputs.rows();
  const auto d = inputs.cols();
  if (m < 2) throw InputError("fit_gp: need at least two training points");
  if (targets.size() != m) throw InputError("fit_gp: target count mismatch");
  if (!targets.allFinite()) throw InputError("fit_gp: non-finite target");
  if (!inputs.allFinite()) throw InputError("fit_gp: non-finite input");

  const GPHyperparams prior = prior_hyperparams(static_cast<std::size_t>(d), config);
  bool degenerate = true;
  for (Eigen::Index i = 1; i < m && degenerate; ++i) {
    if (inputs.row(i) != inputs.row(0)) degenerate = false;
  }
  if (degenerate) return GPModel(prior, inputs, targets, config.standardize, true);

  Vector y = targets;
  if (config.standardize) {
    const double mu = y.mean();
    const double var = (y.array() - mu).square().sum() / static_cast<double>(m - 1);
    const double sd = var > 1e-24 ? std::sqrt(var) : 1.0;
    y = (y.array() - mu) / sd;
  }

  Vector lower(d + 3), upper(d + 3);
  lower.head(d).setConstant(std::log(config.lengthscale_min));
  upper.head(d).setConstant(std::log(config.lengthscale_max));
  lower[d] = std::log(config.signal_min);
  upper[d] = std::log(config.signal_max);
  lower[d + 1] = std::log(config.noise_min);
  upper[d + 1] = std::log(config.noise_max);
  lower[d + 2] = -config.mean_bound;
  upper[d + 2] = config.mean_bound;

  auto negative_lml = [&](const Vector& theta, Vector& grad) {
    try {
      const auto r = gp_log_marginal_likelihood(GPHyperparams::from_vector(theta), inputs, y);
      grad = -r.gradient;
      return -r.value;
    } catch (const NumericalError&) {
      grad.setZero(theta.size());
      return std::numeric_limits<double>::infinity();
    }
  };

  Rng rng = make_rng(config.seed, {0x6770u});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) {
    return std::log(lo) + unit(rng) * (std::log(hi) - std::log(lo));
  };

  Vector best_theta = prior.to_vector();
  double best_value = std::numeric_limits<double>::infinity();
  const int starts = std::max(1, config.restarts);
  for (int start = 0; start < starts; ++start) {
    Vector theta0 = prior.to_vector();
    if (start == 0 && warm_start && warm_start->lengthscales.size() == d) {
      theta0 = warm_start->to_vector();
    } else if (start > 0) {
      for (Eigen::Index j = 0; j < d; ++j) {
        theta0[j] = log_uniform(std::max(config.lengthscale_min, 0.05), std::min(config.lengthscale_max, 2.0));
      }
      theta0[d] = log_uniform(std::max(config.signal_min, 0.5), std::min(config.signal_max, 2.0));
      theta0[d + 1] = log_uniform(config.noise_min, std::max(config.noise_min, std::min(config.noise_max, 1e-2)));
      theta0[d + 2] = 0.0;
    }
    const Vector theta = detail::minimize_box(negative_lml, theta0, lower, upper, config.max_iterations,
                                              config.gradient_tolerance);
    Vector unused(theta.size());
    const double value = negative_lml(theta, unused);
    if (value < best_value) {
      best_value = value;
      best_theta = theta;
    }
  }
  return GPModel(GPHyperparams::from_vector(best_theta), inputs, targets, config.standardize,
                 !std::isfinite(best_value));
}

inline GPPosterior gp_posterior(const GPModel& model, const Matrix& points) { return model.posterior(points); }

/// Factorized joint posterior at a fixed point set; draws reuse the factor.
class JointPosteriorSampler {
 public:
  JointPosteriorSampler(const GPModel& model, const Matrix& points) {
    GPPosterior post = model.posterior(points);
    mean_ = std::move(post.mean);
    // Jitter is relative to the posterior scale so that de-standardized
    // covariances factor the same way as standardized ones.
    const double scale2 = model.target_scale() * model.target_scale();
    const Matrix standardized = post.covariance / scale2;
    chol_ = detail::robust_cholesky(standardized).matrixL();
    chol_ *= model.target_scale();
  }

  const Vector& mean() const { return mean_; }
  const Matrix& factor() const { return chol_; }

  Vector draw(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(mean_.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    return mean_ + chol_.triangularView<Eigen::Lower>() * z;
  }

 private:
  Vector mean_;
  Matrix chol_;
};

/// One joint draw from the posterior at `points`.
inline Vector gp_sample_joint(const GPModel& model, const Matrix& points, Rng& rng) {
  return JointPosteriorSampler(model, points).draw(rng);
}

}  // namespace covebo
