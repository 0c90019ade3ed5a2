#include "ncgp/bezier.hpp"

#include <cmath>
#include <string>

#include "ncgp/errors.hpp"

namespace ncgp {

namespace {

double binomial(int n, int k) {
  if (k > n - k) k = n - k;
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(c);
}

void check_degree(int degree) {
  if (degree < 0 || degree > kMaxDegree) {
    throw InvalidArgument("curve degree " + std::to_string(degree) + " outside [0, " +
                          std::to_string(kMaxDegree) + "]");
  }
}

void check_unit_interval(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError("curve parameter " + std::to_string(t) + " outside [0, 1]");
  }
}

}  // namespace

double bernstein(int l, int degree, double t) {
  check_degree(degree);
  if (l < 0 || l > degree) {
    throw IndexOutOfRange("bernstein index " + std::to_string(l) + " outside [0, " +
                          std::to_string(degree) + "]");
  }
  check_unit_interval(t);
  return binomial(degree, l) * std::pow(1.0 - t, degree - l) * std::pow(t, l);
}

Eigen::VectorXd bernstein_all(int degree, double t) {
  Eigen::VectorXd b(degree + 1);
  for (int l = 0; l <= degree; ++l) b(l) = bernstein(l, degree, t);
  return b;
}

TimeGrid::TimeGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidCount("time grid must not be empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    check_unit_interval(values_[i]);
    if (i > 0 && !(values_[i] > values_[i - 1])) {
      throw InvalidArgument("time grid must be strictly increasing");
    }
  }
}

TimeGrid TimeGrid::uniform(int n) {
  if (n < 2) throw InvalidCount("uniform grid needs n >= 2, got " + std::to_string(n));
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
  v.back() = 1.0;
  return TimeGrid(std::move(v));
}

TimeGrid TimeGrid::subset(const std::vector<int>& positions) const {
  std::vector<double> v;
  v.reserve(positions.size());
  for (int p : positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= values_.size()) {
      throw IndexOutOfRange("grid position " + std::to_string(p) + " out of range");
    }
    v.push_back(values_[static_cast<std::size_t>(p)]);
  }
  return TimeGrid(std::move(v));
}

NCurve::NCurve(std::vector<GaussianDist> control_points) : points_(std::move(control_points)) {
  if (points_.size() < 2) throw InvalidCount("an N-Curve needs at least 2 control points");
  check_degree(degree());
  const Index d = points_.front().dim();
  if (d < 1) throw DimensionError("control points must have dimension >= 1");
  for (const auto& p : points_) {
    if (p.dim() != d) throw DimensionError("control points differ in dimension");
  }
}

Eigen::VectorXd NCurve::stacked_means() const {
  const Index d = dim();
  Eigen::VectorXd out(static_cast<Index>(points_.size()) * d);
  for (std::size_t l = 0; l < points_.size(); ++l) {
    out.segment(static_cast<Index>(l) * d, d) = points_[l].mean();
  }
  return out;
}

Eigen::MatrixXd NCurve::block_covariance() const {
  const Index d = dim();
  const Index n = static_cast<Index>(points_.size()) * d;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t l = 0; l < points_.size(); ++l) {
    out.block(static_cast<Index>(l) * d, static_cast<Index>(l) * d, d, d) = points_[l].cov();
  }
  return out;
}

GaussianDist curve_point(const NCurve& c, double t) {
  check_unit_interval(t);
  const Index d = c.dim();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (int l = 0; l <= c.degree(); ++l) {
    const double b = bernstein(l, c.degree(), t);
    mean += b * c.control_point(l).mean();
    cov += (b * b) * c.control_point(l).cov();
  }
  return GaussianDist(std::move(mean), std::move(cov));
}

Eigen::MatrixXd construction_matrix(int degree, Index d, const TimeGrid& grid) {
  const Index n = static_cast<Index>(grid.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n * d, (degree + 1) * d);
  for (Index j = 0; j < n; ++j) {
    for (int l = 0; l <= degree; ++l) {
      const double b = bernstein(l, degree, grid[static_cast<std::size_t>(j)]);
      c.block(j * d, l * d, d, d).diagonal().setConstant(b);
    }
  }
  return c;
}

Eigen::MatrixXd construction_matrix(const NCurve& c, const TimeGrid& grid) {
  return construction_matrix(c.degree(), c.dim(), grid);
}

GaussianDist joint_via_transform(const NCurve& c, const TimeGrid& grid) {
  const Eigen::MatrixXd cm = construction_matrix(c, grid);
  Eigen::MatrixXd cov = cm * c.block_covariance() * cm.transpose();
  return GaussianDist(cm * c.stacked_means(), 0.5 * (cov + cov.transpose()));
}

}  // namespace ncgp
