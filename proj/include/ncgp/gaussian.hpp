#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ncgp {

using Index = Eigen::Index;

/**
 * Multivariate normal distribution N(mean, cov).
 *
 * The covariance is symmetrized as (A + A^T) / 2 on construction; inputs whose
 * asymmetry exceeds 1e-10 relative to their largest entry are rejected. A
 * zero-dimensional distribution is allowed and acts as the empty event.
 */
class GaussianDist {
 public:
  GaussianDist() = default;
  GaussianDist(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  /// Isotropic or diagonal helpers used throughout the tests and tools.
  static GaussianDist diagonal(Eigen::VectorXd mean, const Eigen::VectorXd& variances);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  Index dim() const { return mean_.size(); }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
};

/// Split of the flat indices {0, ..., m-1} into an observed and a latent block.
struct IndexPartition {
  std::vector<Index> observed;
  std::vector<Index> latent;

  /// Builds the partition whose latent block is the complement of `observed`.
  static IndexPartition from_observed(std::vector<Index> observed, Index m);

  /// Throws IndexOutOfRange / InvalidArgument unless the blocks are sorted,
  /// disjoint and cover {0, ..., m-1}.
  void validate(Index m) const;
};

/// Lower Cholesky factor of `a`, retrying with diagonal jitter
/// {0, 1e-12, 1e-10, 1e-8} scaled by the mean absolute diagonal.
/// Throws NonPSDCovariance when every rung fails.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& a);

/// A matrix F with F F^T = a for positive semi-definite `a`, exact for
/// singular inputs (a zero matrix yields a zero factor). Throws
/// NonPSDCovariance on materially negative eigenvalues.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& a);

double log_pdf(const GaussianDist& g, const Eigen::VectorXd& x);

/// `n` draws, each mean + F z with z standard normal; deterministic in `seed`.
std::vector<Eigen::VectorXd> sample(const GaussianDist& g, std::uint64_t seed, std::size_t n);

/// Restriction to `keep` (order preserved, duplicates rejected).
GaussianDist marginalize(const GaussianDist& g, std::span<const Index> keep);

/// Distribution of the latent block given the observed block equals
/// `obs_values`, with `obs_noise` * I added to the observed covariance.
GaussianDist condition(const GaussianDist& g, const IndexPartition& part,
                       const Eigen::VectorXd& obs_values, double obs_noise = 0.0);

/// log N(obs_values | mean_o, cov_oo + obs_noise * I). Zero for an empty observed block.
double observed_marginal_logpdf(const GaussianDist& g, const IndexPartition& part,
                                const Eigen::VectorXd& obs_values, double obs_noise = 0.0);

/// log(sum(exp(v))) without overflow; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> v);

}  // namespace ncgp
