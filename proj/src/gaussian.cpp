#include "ncgp/gaussian.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ncgp/errors.hpp"

namespace ncgp {

namespace {

constexpr double kSymmetryTolerance = 1e-10;
constexpr std::array<double, 4> kJitterLadder = {0.0, 1e-12, 1e-10, 1e-8};

double jitter_scale(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) return 1.0;
  const double s = a.diagonal().cwiseAbs().mean();
  return s > 0.0 ? s : 1.0;
}

Eigen::MatrixXd select(const Eigen::MatrixXd& a, std::span<const Index> rows,
                       std::span<const Index> cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Index>(i), static_cast<Index>(j)) = a(rows[i], cols[j]);
    }
  }
  return out;
}

Eigen::VectorXd select(const Eigen::VectorXd& v, std::span<const Index> idx) {
  Eigen::VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

void check_sorted_unique(const std::vector<Index>& v, Index m, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0 || v[i] >= m) {
      throw IndexOutOfRange(std::string(what) + " index " + std::to_string(v[i]) +
                            " outside [0, " + std::to_string(m) + ")");
    }
    if (i > 0 && v[i] <= v[i - 1]) {
      throw InvalidArgument(std::string(what) + " indices must be strictly increasing");
    }
  }
}

// log N(x | mean, cov) given the lower Cholesky factor of cov.
double log_pdf_from_factor(const Eigen::MatrixXd& chol, const Eigen::VectorXd& diff) {
  const Index m = diff.size();
  if (m == 0) return 0.0;
  const Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(diff);
  const double log_det = 2.0 * chol.diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + log_det +
                 z.squaredNorm());
}

}  // namespace

GaussianDist::GaussianDist(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
    throw DimensionError("covariance is " + std::to_string(cov_.rows()) + "x" +
                         std::to_string(cov_.cols()) + " but mean has length " +
                         std::to_string(mean_.size()));
  }
  if (!mean_.allFinite() || !cov_.allFinite()) {
    throw InvalidArgument("gaussian parameters must be finite");
  }
  if (mean_.size() == 0) return;
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale) {
    throw InvalidArgument("covariance is not symmetric (max deviation " + std::to_string(asym) +
                          ")");
  }
  const Eigen::MatrixXd sym = 0.5 * (cov_ + cov_.transpose());
  cov_ = sym;
}

GaussianDist GaussianDist::diagonal(Eigen::VectorXd mean, const Eigen::VectorXd& variances) {
  Eigen::MatrixXd cov = variances.asDiagonal();
  return GaussianDist(std::move(mean), std::move(cov));
}

IndexPartition IndexPartition::from_observed(std::vector<Index> observed, Index m) {
  std::sort(observed.begin(), observed.end());
  IndexPartition part;
  part.observed = std::move(observed);
  check_sorted_unique(part.observed, m, "observed");
  part.latent.reserve(static_cast<std::size_t>(m) - part.observed.size());
  auto it = part.observed.begin();
  for (Index i = 0; i < m; ++i) {
    if (it != part.observed.end() && *it == i) {
      ++it;
    } else {
      part.latent.push_back(i);
    }
  }
  return part;
}

void IndexPartition::validate(Index m) const {
  check_sorted_unique(observed, m, "observed");
  check_sorted_unique(latent, m, "latent");
  if (static_cast<Index>(observed.size() + latent.size()) != m) {
    throw InvalidArgument("partition does not cover all " + std::to_string(m) + " indices");
  }
  std::vector<Index> merged;
  std::merge(observed.begin(), observed.end(), latent.begin(), latent.end(),
             std::back_inserter(merged));
  for (Index i = 0; i < m; ++i) {
    if (merged[static_cast<std::size_t>(i)] != i) {
      throw InvalidArgument("observed and latent blocks overlap");
    }
  }
}

Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& a) {
  const Index m = a.rows();
  if (m == 0) return Eigen::MatrixXd(0, 0);
  const double scale = jitter_scale(a);
  for (double rung : kJitterLadder) {
    Eigen::MatrixXd shifted = a;
    shifted.diagonal().array() += rung * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
      return llt.matrixL();
    }
  }
  throw NonPSDCovariance("cholesky failed on " + std::to_string(m) + "x" + std::to_string(m) +
                         " matrix after jitter " + std::to_string(kJitterLadder.back() * scale));
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& a) {
  const Index m = a.rows();
  if (m == 0) return Eigen::MatrixXd(0, 0);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  // Singular PSD input: a = V diag(lambda) V^T with round-off negatives clamped.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) {
    throw NonPSDCovariance("eigendecomposition failed");
  }
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double tol = kJitterLadder.back() * jitter_scale(a);
  if (lambda.minCoeff() < -tol) {
    throw NonPSDCovariance("matrix has a negative eigenvalue " + std::to_string(lambda.minCoeff()));
  }
  // Eigenvalues at round-off level belong to the null space; their square
  // roots (~1e-8) would otherwise leak noise out of the column space.
  const double floor = static_cast<double>(m) * std::numeric_limits<double>::epsilon() *
                       lambda.cwiseAbs().maxCoeff();
  lambda = (lambda.array() > floor).select(lambda.cwiseSqrt(), 0.0);
  return eig.eigenvectors() * lambda.asDiagonal();
}

double log_pdf(const GaussianDist& g, const Eigen::VectorXd& x) {
  if (x.size() != g.dim()) {
    throw DimensionError("log_pdf: point has dimension " + std::to_string(x.size()) +
                         ", distribution " + std::to_string(g.dim()));
  }
  return log_pdf_from_factor(cholesky_with_jitter(g.cov()), x - g.mean());
}

std::vector<Eigen::VectorXd> sample(const GaussianDist& g, std::uint64_t seed, std::size_t n) {
  const Eigen::MatrixXd f = psd_factor(g.cov());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  Eigen::VectorXd z(g.dim());
  for (std::size_t s = 0; s < n; ++s) {
    for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    out.emplace_back(g.mean() + f * z);
  }
  return out;
}

GaussianDist marginalize(const GaussianDist& g, std::span<const Index> keep) {
  if (keep.empty()) throw InvalidArgument("marginalize: keep set is empty");
  std::vector<Index> seen(keep.begin(), keep.end());
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw InvalidArgument("marginalize: duplicate index in keep set");
  }
  for (Index k : keep) {
    if (k < 0 || k >= g.dim()) {
      throw IndexOutOfRange("marginalize: index " + std::to_string(k) + " outside [0, " +
                            std::to_string(g.dim()) + ")");
    }
  }
  return GaussianDist(select(g.mean(), keep), select(g.cov(), keep, keep));
}

GaussianDist condition(const GaussianDist& g, const IndexPartition& part,
                       const Eigen::VectorXd& obs_values, double obs_noise) {
  part.validate(g.dim());
  if (obs_values.size() != static_cast<Index>(part.observed.size())) {
    throw DimensionError("condition: " + std::to_string(obs_values.size()) +
                         " values for " + std::to_string(part.observed.size()) +
                         " observed indices");
  }
  if (obs_noise < 0.0) throw InvalidArgument("condition: obs_noise must be >= 0");

  const Eigen::VectorXd mu_l = select(g.mean(), part.latent);
  const Eigen::MatrixXd cov_ll = select(g.cov(), part.latent, part.latent);
  if (part.observed.empty()) return GaussianDist(mu_l, cov_ll);

  const Eigen::VectorXd mu_o = select(g.mean(), part.observed);
  Eigen::MatrixXd cov_oo = select(g.cov(), part.observed, part.observed);
  cov_oo.diagonal().array() += obs_noise;
  const Eigen::MatrixXd cov_lo = select(g.cov(), part.latent, part.observed);

  const Eigen::MatrixXd chol = cholesky_with_jitter(cov_oo);
  const auto lower = chol.triangularView<Eigen::Lower>();
  // gain^T = cov_oo^{-1} cov_ol
  Eigen::MatrixXd gain_t = lower.solve(cov_lo.transpose());
  lower.transpose().solveInPlace(gain_t);
  Eigen::VectorXd innovation = lower.solve(obs_values - mu_o);
  lower.transpose().solveInPlace(innovation);

  Eigen::VectorXd mean = mu_l + cov_lo * innovation;
  Eigen::MatrixXd cov = cov_ll - cov_lo * gain_t;
  cov = 0.5 * (cov + cov.transpose());
  return GaussianDist(std::move(mean), std::move(cov));
}

double observed_marginal_logpdf(const GaussianDist& g, const IndexPartition& part,
                                const Eigen::VectorXd& obs_values, double obs_noise) {
  part.validate(g.dim());
  if (obs_values.size() != static_cast<Index>(part.observed.size())) {
    throw DimensionError("observed_marginal_logpdf: value count does not match observed block");
  }
  if (obs_noise < 0.0) throw InvalidArgument("obs_noise must be >= 0");
  if (part.observed.empty()) return 0.0;
  Eigen::MatrixXd cov_oo = select(g.cov(), part.observed, part.observed);
  cov_oo.diagonal().array() += obs_noise;
  return log_pdf_from_factor(cholesky_with_jitter(cov_oo),
                             obs_values - select(g.mean(), part.observed));
}

double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

}  // namespace ncgp
