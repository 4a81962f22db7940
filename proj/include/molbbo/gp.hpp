// Exact Gaussian-process regression over fingerprints with the Tanimoto
// kernel k(x, x') = amplitude^2 * |x AND x'| / (|x| + |x'| - |x AND x'|).
//
// Serves two roles: sampling smooth synthetic functions from the zero-mean
// prior (training data for the in-context surrogate) and the classic GP
// Bayesian-optimization baseline.  Everything is dense and exact; hyper-
// parameters come from a deterministic log-space grid search.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "molbbo/fingerprint.hpp"

namespace molbbo {

struct GpHyperparams {
  double amplitude2 = 1.0;  // output-scale variance, > 0
  double noise2 = 0.0;      // observation noise variance, >= 0
};

// Kernel matrix could not be Cholesky-factorized even at the largest jitter.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training targets carry (numerically) zero variance; MLE is meaningless.
class DegenerateData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense symmetric kernel matrix: entry (i, j) = amplitude2 * tanimoto(x_i, x_j).
Eigen::MatrixXd kernel_matrix(const std::vector<Fingerprint>& xs,
                              const GpHyperparams& hyper);

// Draw y = L * z with L = chol(K + jitter I) and z standard normal from the
// seed.  Jitter starts at 1e-6 * amplitude2 and escalates x10 up to
// 1e-2 * amplitude2 before FactorizationError.  Deterministic per seed.
// Capped at 2000 points (dense Cholesky bound).
std::vector<double> sample_prior(const std::vector<Fingerprint>& xs,
                                 const GpHyperparams& hyper, std::uint64_t seed);

struct GpPrediction {
  std::vector<double> mean;
  std::vector<double> std;
};

class TanimotoGP {
 public:
  // Empty prior model: predictions are mean 0, std = amplitude.
  explicit TanimotoGP(GpHyperparams hyper = {});

  // Fits the Cholesky factor of (amplitude2 K + noise2 I); jitter is added
  // only if the plain factorization fails, escalating as in sample_prior.
  TanimotoGP(std::vector<Fingerprint> xs, std::vector<double> ys, GpHyperparams hyper);

  // Exhaustive log-space grid search maximizing the exact log marginal
  // likelihood: amplitude2 over 10^{-2..2} (9 points), noise2 over
  // 10^{-6..0} (13 points).  Ties break toward larger noise2.  Requires at
  // least 2 points and nonzero y variance (else DegenerateData).
  static GpHyperparams fit_mle(const std::vector<Fingerprint>& xs,
                               const std::vector<double>& ys);

  // Exact posterior: mean = k^T alpha, var = amplitude2 - |L^{-1} k|^2,
  // floored at 1e-12; std = sqrt(var).
  GpPrediction predict(const std::vector<Fingerprint>& query) const;

  // Log marginal likelihood of the training targets under the fitted factor.
  double log_marginal_likelihood() const;

  const GpHyperparams& hyper() const { return hyper_; }
  int size() const { return static_cast<int>(train_x_.size()); }
  double jitter_used() const { return jitter_used_; }

 private:
  std::vector<Fingerprint> train_x_;
  Eigen::VectorXd train_y_;
  Eigen::VectorXd alpha_;  // (amp2 K + noise2 I + jitter I)^{-1} y
  Eigen::MatrixXd chol_;   // lower-triangular factor of the same matrix
  GpHyperparams hyper_;
  double jitter_used_ = 0.0;
};

}  // namespace molbbo
