#include "molbbo/gp.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "molbbo/rng.hpp"

namespace molbbo {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kVarFloor = 1e-12;

// Factor m + jitter I, trying the ladder of jitters in `jitters` (the first
// entry may be 0).  Returns the factor and the jitter that worked.
std::pair<Eigen::MatrixXd, double> chol_with_jitter(const Eigen::MatrixXd& m,
                                                    const std::vector<double>& jitters) {
  for (double jitter : jitters) {
    Eigen::MatrixXd regularized = m;
    if (jitter > 0.0) {
      regularized.diagonal().array() += jitter;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(regularized);
    if (llt.info() == Eigen::Success) {
      return {Eigen::MatrixXd(llt.matrixL()), jitter};
    }
  }
  throw FactorizationError("kernel matrix not factorizable after jitter escalation");
}

std::vector<double> jitter_ladder(double amplitude2, bool include_zero) {
  std::vector<double> ladder;
  if (include_zero) ladder.push_back(0.0);
  for (double j = 1e-6; j <= 1e-2 * 1.0000001; j *= 10.0) {
    ladder.push_back(j * amplitude2);
  }
  return ladder;
}

double lml_from_factor(const Eigen::MatrixXd& chol, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& alpha) {
  const auto n = static_cast<double>(y.size());
  double log_det_half = 0.0;  // sum log L_ii = (1/2) log det
  for (Eigen::Index i = 0; i < chol.rows(); ++i) log_det_half += std::log(chol(i, i));
  return -0.5 * y.dot(alpha) - log_det_half - 0.5 * n * kLog2Pi;
}

}  // namespace

Eigen::MatrixXd kernel_matrix(const std::vector<Fingerprint>& xs,
                              const GpHyperparams& hyper) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = hyper.amplitude2;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = hyper.amplitude2 * tanimoto(xs[static_cast<std::size_t>(i)],
                                                   xs[static_cast<std::size_t>(j)]);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

std::vector<double> sample_prior(const std::vector<Fingerprint>& xs,
                                 const GpHyperparams& hyper, std::uint64_t seed) {
  if (xs.empty()) return {};
  if (xs.size() > 2000) {
    throw std::invalid_argument("sample_prior: more than 2000 points");
  }
  const Eigen::MatrixXd k = kernel_matrix(xs, hyper);
  const auto [chol, jitter] =
      chol_with_jitter(k, jitter_ladder(hyper.amplitude2, /*include_zero=*/false));
  (void)jitter;
  Rng rng(seed);
  Eigen::VectorXd z(static_cast<Eigen::Index>(xs.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const Eigen::VectorXd y = chol * z;
  return {y.data(), y.data() + y.size()};
}

TanimotoGP::TanimotoGP(GpHyperparams hyper) : hyper_(hyper) {}

TanimotoGP::TanimotoGP(std::vector<Fingerprint> xs, std::vector<double> ys,
                       GpHyperparams hyper)
    : train_x_(std::move(xs)), hyper_(hyper) {
  if (train_x_.size() != ys.size()) {
    throw std::invalid_argument("TanimotoGP: |xs| != |ys|");
  }
  train_y_ = Eigen::Map<const Eigen::VectorXd>(ys.data(),
                                               static_cast<Eigen::Index>(ys.size()));
  if (train_x_.empty()) return;
  Eigen::MatrixXd m = kernel_matrix(train_x_, hyper_);
  m.diagonal().array() += hyper_.noise2;
  auto [chol, jitter] =
      chol_with_jitter(m, jitter_ladder(hyper_.amplitude2, /*include_zero=*/true));
  chol_ = std::move(chol);
  jitter_used_ = jitter;
  alpha_ = chol_.triangularView<Eigen::Lower>().solve(train_y_);
  chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
}

GpHyperparams TanimotoGP::fit_mle(const std::vector<Fingerprint>& xs,
                                  const std::vector<double>& ys) {
  if (xs.size() < 2 || xs.size() != ys.size()) {
    throw std::invalid_argument("fit_mle: need at least 2 paired observations");
  }
  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(ys.size());
  double var = 0.0;
  for (double y : ys) var += (y - mean) * (y - mean);
  var /= static_cast<double>(ys.size());
  if (var < 1e-12) throw DegenerateData("fit_mle: targets have (near-)zero variance");

  GpHyperparams best;
  double best_lml = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (int ai = 0; ai <= 8; ++ai) {
    const double amplitude2 = std::pow(10.0, -2.0 + 0.5 * ai);
    for (int ni = 0; ni <= 12; ++ni) {
      const double noise2 = std::pow(10.0, -6.0 + 0.5 * ni);
      try {
        const TanimotoGP gp(xs, ys, {amplitude2, noise2});
        const double lml = gp.log_marginal_likelihood();
        if (!found || lml > best_lml ||
            (lml == best_lml && noise2 > best.noise2)) {
          best = {amplitude2, noise2};
          best_lml = lml;
          found = true;
        }
      } catch (const FactorizationError&) {
        // skip grid points whose kernel cannot be factorized
      }
    }
  }
  if (!found) throw FactorizationError("fit_mle: no grid point factorizable");
  return best;
}

GpPrediction TanimotoGP::predict(const std::vector<Fingerprint>& query) const {
  GpPrediction out;
  out.mean.reserve(query.size());
  out.std.reserve(query.size());
  const auto n = static_cast<Eigen::Index>(train_x_.size());
  for (const Fingerprint& q : query) {
    if (n == 0) {
      out.mean.push_back(0.0);
      out.std.push_back(std::sqrt(hyper_.amplitude2));
      continue;
    }
    Eigen::VectorXd k_star(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      k_star(i) = hyper_.amplitude2 * tanimoto(train_x_[static_cast<std::size_t>(i)], q);
    }
    const double mean = k_star.dot(alpha_);
    const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k_star);
    const double var = std::max(hyper_.amplitude2 - v.squaredNorm(), kVarFloor);
    out.mean.push_back(mean);
    out.std.push_back(std::sqrt(var));
  }
  return out;
}

double TanimotoGP::log_marginal_likelihood() const {
  if (train_x_.empty()) return 0.0;
  return lml_from_factor(chol_, train_y_, alpha_);
}

}  // namespace molbbo
