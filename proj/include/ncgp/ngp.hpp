#pragma once

#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "ncgp/bezier.hpp"
#include "ncgp/gaussian.hpp"

namespace ncgp {

/// Finite-grid marginal of a (possibly multivariate) Gaussian process.
/// `dist` has dimension grid.size() * d in time-major layout.
struct JointGaussian {
  TimeGrid grid;
  GaussianDist dist;
  Index d = 1;

  std::size_t steps() const { return grid.size(); }
  /// Marginal of the point at grid position `pos`.
  GaussianDist step_marginal(std::size_t pos) const;
};

struct NCurveKernel {
  NCurve curve;
};

/// sigma^2 exp(-|ti - tj|^2 / (2 length^2))
struct RbfKernel {
  double sigma = 1.0;
  double length_scale = 0.25;
};

/// sigma_b^2 + sigma^2 (ti - c)(tj - c)
struct LinearKernel {
  double sigma = 0.5;
  double sigma_b = 0.5;
  double c = 0.5;
};

using KernelSpec = std::variant<NCurveKernel, RbfKernel, LinearKernel>;

/// Throws InvalidArgument if a reference kernel has non-positive sigma/length or negative sigma_b.
void validate(const KernelSpec& spec);

/// Closed-form covariance of a 1-D N-Curve between parameters ti and tj.
double kernel_univariate(const NCurve& c, double ti, double tj);

/// Matrix-valued kernel cov(X_ti, X_tj) (d x d) in its expanded closed form.
Eigen::MatrixXd kernel_matrix(const NCurve& c, double ti, double tj);

double rbf_kernel(const RbfKernel& k, double ti, double tj);
double linear_kernel(const LinearKernel& k, double ti, double tj);

/// Curve means at every grid point, stacked time-major (N*d).
Eigen::VectorXd mean_vector(const NCurve& c, const TimeGrid& grid);

/**
 * Assembles the joint prior over `grid`.
 *
 * Only blocks with i <= j are evaluated; the lower triangle is mirrored.
 * Blocks are evaluated in parallel and each is written by exactly one
 * worker, so the result is identical to gram_serial for any thread count.
 * Reference kernels require d == 1 and carry a zero mean.
 */
JointGaussian gram(const KernelSpec& spec, const TimeGrid& grid, Index d);

/// Single-threaded reference for gram().
JointGaussian gram_serial(const KernelSpec& spec, const TimeGrid& grid, Index d);

/// (G - min G) / (max G - min G), entrywise. A constant matrix maps to zero.
Eigen::MatrixXd normalize_minmax(const Eigen::MatrixXd& g);

/// `n` draws of the whole sequence; each is an (N x d) matrix, row j = step j.
std::vector<Eigen::MatrixXd> sample_prior(const JointGaussian& j, std::uint64_t seed,
                                          std::size_t n);

/// Row-major CSV of `m`; the header lists the grid value of each column.
void write_gram_csv(std::ostream& out, const TimeGrid& grid, Index d, const Eigen::MatrixXd& m);

/// Long-format CSV `sample,step,t,dim0,...`.
void write_samples_csv(std::ostream& out, const TimeGrid& grid,
                       const std::vector<Eigen::MatrixXd>& samples);

}  // namespace ncgp
