#pragma once

#include <vector>

#include <Eigen/Core>

#include "ncgp/gaussian.hpp"

namespace ncgp {

/// Largest supported curve degree; binomials stay exact in double below this.
inline constexpr int kMaxDegree = 60;

/// Bernstein basis polynomial b_{l,degree}(t) = C(degree, l) (1-t)^(degree-l) t^l.
double bernstein(int l, int degree, double t);

/// All degree+1 basis values at t.
Eigen::VectorXd bernstein_all(int degree, double t);

/// Strictly increasing curve parameters in [0, 1].
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> values);

  /// {v / (n - 1) : v = 0, ..., n - 1}; InvalidCount for n < 2.
  static TimeGrid uniform(int n);

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Grid restricted to the given positions (sorted, in range).
  TimeGrid subset(const std::vector<int>& positions) const;

 private:
  std::vector<double> values_;
};

inline TimeGrid uniform_grid(int n) { return TimeGrid::uniform(n); }

/**
 * Bezier curve with independent Gaussian control points (an N-Curve).
 *
 * Each control point carries its own covariance; cross-covariances between
 * control points are not representable, so independence holds by construction.
 */
class NCurve {
 public:
  NCurve() = default;
  explicit NCurve(std::vector<GaussianDist> control_points);

  const std::vector<GaussianDist>& control_points() const { return points_; }
  const GaussianDist& control_point(int l) const { return points_[static_cast<std::size_t>(l)]; }
  int degree() const { return static_cast<int>(points_.size()) - 1; }
  Index dim() const { return points_.front().dim(); }

  /// Control means stacked control-point-major: ((L+1)*d).
  Eigen::VectorXd stacked_means() const;
  /// blockdiag(Sigma_0, ..., Sigma_L).
  Eigen::MatrixXd block_covariance() const;

 private:
  std::vector<GaussianDist> points_;
};

/// Curve point distribution N(sum_l b_l mu_l, sum_l b_l^2 Sigma_l). DomainError outside [0, 1].
GaussianDist curve_point(const NCurve& c, double t);

/// (N*d x (L+1)*d) matrix whose (j, l) block is b_{l,L}(t_j) I_d.
Eigen::MatrixXd construction_matrix(int degree, Index d, const TimeGrid& grid);
Eigen::MatrixXd construction_matrix(const NCurve& c, const TimeGrid& grid);

/// Joint law of the curve points on `grid` as the linear image C P of the
/// stacked control points. Flat layout is time-major: step j occupies
/// indices [j*d, j*d + d).
GaussianDist joint_via_transform(const NCurve& c, const TimeGrid& grid);

}  // namespace ncgp
